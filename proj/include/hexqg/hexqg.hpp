#pragma once

#include "hexqg/bands.hpp"
#include "hexqg/borg.hpp"
#include "hexqg/dn.hpp"
#include "hexqg/edge_ode.hpp"
#include "hexqg/eisenstein.hpp"
#include "hexqg/hexlattice.hpp"
#include "hexqg/inverse.hpp"
#include "hexqg/io.hpp"
#include "hexqg/pipeline.hpp"
#include "hexqg/vertex_system.hpp"
