#include <iostream>

#include "embellish/cli/app.hpp"

int main(int argc, char** argv) { return embellish::cli::run_cli(argc, argv, std::cout, std::cerr); }
