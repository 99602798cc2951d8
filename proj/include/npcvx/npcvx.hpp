#pragma once

#include "npcvx/builtin_problems.hpp"
#include "npcvx/classical_np.hpp"
#include "npcvx/errors.hpp"
#include "npcvx/hedging.hpp"
#include "npcvx/io.hpp"
#include "npcvx/measure.hpp"
#include "npcvx/np_solver.hpp"
#include "npcvx/numeric.hpp"
#include "npcvx/oracle.hpp"
#include "npcvx/risk.hpp"
#include "npcvx/simplex.hpp"
