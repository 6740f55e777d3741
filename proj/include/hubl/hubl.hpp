#pragma once

#include "hubl/analysis.hpp"
#include "hubl/dataset.hpp"
#include "hubl/dynamic_programming.hpp"
#include "hubl/generators.hpp"
#include "hubl/io.hpp"
#include "hubl/mdp.hpp"
#include "hubl/random.hpp"
#include "hubl/relabel.hpp"
#include "hubl/reshaped.hpp"
#include "hubl/vilcb.hpp"
