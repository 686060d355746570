#ifndef QUCERT_SIMBENCH_HPP
#define QUCERT_SIMBENCH_HPP

#include <string>

#include "qucert/grid_model.hpp"

namespace qucert {

/// Raw CSV texts in SimBench column conventions (';' or ',' separated).
struct SimbenchTables {
    std::string nodes;   // id, vmR [, type, vmSetp]
    std::string lines;   // nodeA, nodeB, length, r, x [, b, id]
    std::string trafos;  // nodeHV, nodeLV, sR, vmImp [, pCu, id]
    std::string loads;   // node, pLoad [, qLoad]
    std::string res;     // node, pRES [, id]
};

/// Builds a validated GridModel from SimBench-style tables. A node row with
/// type "slack" marks the slack; without one the first node row is used.
/// RES rows become wf-frc plants with installed = rated = operating = pRES.
GridModel import_simbench(const SimbenchTables& tables);

}  // namespace qucert

#endif
