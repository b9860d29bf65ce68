#pragma once

#include "errors.hpp"
#include "params.hpp"
#include "grid.hpp"
#include "fft.hpp"
#include "lattice_zeta.hpp"
#include "spectral.hpp"
#include "energy.hpp"
#include "landscape.hpp"
#include "potential.hpp"
#include "ground_state.hpp"
#include "dynamics.hpp"
#include "probe.hpp"
#include "io.hpp"
#include "run.hpp"
