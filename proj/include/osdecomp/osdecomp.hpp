#ifndef OSDECOMP_OSDECOMP_HPP
#define OSDECOMP_OSDECOMP_HPP

#include "osdecomp/csv.hpp"
#include "osdecomp/decompose.hpp"
#include "osdecomp/distreg.hpp"
#include "osdecomp/grid.hpp"
#include "osdecomp/support.hpp"
#include "osdecomp/synth.hpp"
#include "osdecomp/table.hpp"
#include "osdecomp/transform.hpp"
#include "osdecomp/weighted_ecdf.hpp"

#endif
