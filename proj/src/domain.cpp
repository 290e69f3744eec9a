#include "nullctl/domain.hpp"

#include <sstream>

namespace nullctl {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::InvalidRegion: return "invalid-region";
        case ErrorKind::ConstructionInfeasible: return "construction-infeasible";
        case ErrorKind::Overflow: return "overflow";
        case ErrorKind::ShapeMismatch: return "shape-mismatch";
        case ErrorKind::Instability: return "instability";
        case ErrorKind::CgStagnation: return "cg-stagnation";
        case ErrorKind::SweepDivergence: return "sweep-divergence";
        case ErrorKind::DegenerateSolution: return "degenerate-solution";
        case ErrorKind::CoupledSolveDivergence: return "coupled-solve-divergence";
        case ErrorKind::UnresolvedIterate: return "unresolved-iterate";
        case ErrorKind::NoConvergence: return "no-convergence";
        case ErrorKind::ConfigParse: return "config-parse";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::MissingRun: return "missing-run";
    }
    return "unknown";
}

void DomainSpec::validate() const {
    if (dim != 1 && dim != 2) fail(ErrorKind::InvalidRegion, "domain dimension must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
        std::ostringstream axis;
        axis << " (axis " << a << ")";
        if (!(extent[a] > 0)) fail(ErrorKind::InvalidRegion, "domain extent must be positive" + axis.str());
        if (!(control.lo[a] < control.hi[a]))
            fail(ErrorKind::InvalidRegion, "control region omega is empty" + axis.str());
        if (!(inner.lo[a] < inner.hi[a]))
            fail(ErrorKind::InvalidRegion, "inner region omega0 is empty" + axis.str());
        if (control.lo[a] < 0.0 || control.hi[a] > extent[a])
            fail(ErrorKind::InvalidRegion, "control region omega is not contained in the domain" + axis.str());
        if (!(inner.lo[a] > control.lo[a] && inner.hi[a] < control.hi[a]))
            fail(ErrorKind::InvalidRegion,
                 "closure of inner region omega0 is not contained in omega" + axis.str());
    }
}

}  // namespace nullctl
