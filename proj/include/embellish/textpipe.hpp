#pragma once

#include "embellish/textpipe/entities.hpp"
#include "embellish/textpipe/sentence.hpp"
#include "embellish/textpipe/tokenizer.hpp"
#include "embellish/textpipe/vocabulary.hpp"
