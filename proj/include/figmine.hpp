#pragma once

// Umbrella header for the figmine library.

#include "figmine/alef.hpp"
#include "figmine/analysis.hpp"
#include "figmine/codec.hpp"
#include "figmine/corpus.hpp"
#include "figmine/dismantler.hpp"
#include "figmine/error.hpp"
#include "figmine/features.hpp"
#include "figmine/gate.hpp"
#include "figmine/hash.hpp"
#include "figmine/image.hpp"
#include "figmine/layout.hpp"
#include "figmine/records.hpp"
#include "figmine/search.hpp"
#include "figmine/server.hpp"
#include "figmine/stats.hpp"
#include "figmine/svm.hpp"
#include "figmine/synth.hpp"
#include "figmine/util.hpp"
