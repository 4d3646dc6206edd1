#pragma once

#include "georel/clustering.hpp"
#include "georel/dataset.hpp"
#include "georel/eval.hpp"
#include "georel/geo.hpp"
#include "georel/graph.hpp"
#include "georel/ids.hpp"
#include "georel/io.hpp"
#include "georel/model.hpp"
#include "georel/partonomy.hpp"
#include "georel/recommend.hpp"
#include "georel/synth.hpp"
#include "georel/units.hpp"
#include "georel/weighting.hpp"
