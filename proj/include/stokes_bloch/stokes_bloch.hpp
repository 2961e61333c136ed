#pragma once

#include "stokes_bloch/grid.hpp"
#include "stokes_bloch/fft.hpp"
#include "stokes_bloch/field.hpp"
#include "stokes_bloch/viscosity.hpp"
#include "stokes_bloch/operators.hpp"
#include "stokes_bloch/tensor.hpp"
#include "stokes_bloch/parallel.hpp"
#include "stokes_bloch/solver.hpp"
#include "stokes_bloch/galerkin.hpp"
#include "stokes_bloch/cell_problem.hpp"
#include "stokes_bloch/bloch.hpp"
#include "stokes_bloch/tensor_lab.hpp"
#include "stokes_bloch/eps_validation.hpp"
#include "stokes_bloch/config.hpp"
#include "stokes_bloch/report.hpp"
#include "stokes_bloch/commands.hpp"
