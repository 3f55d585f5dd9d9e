#pragma once

#include "metrology/efa.hpp"

namespace metrology::detail {

void finalize_solution(FactorSolution& s);
void order_and_sign(FactorSolution& s);

}  // namespace metrology::detail
