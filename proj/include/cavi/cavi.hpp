#pragma once

#include "cavi/types.hpp"
#include "cavi/model.hpp"
#include "cavi/engines.hpp"
#include "cavi/stability.hpp"
#include "cavi/synth.hpp"
