#pragma once
#include "ssrlab/covariance.hpp"
#include "ssrlab/fixed_point.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>

namespace ssrlab {

// Evaluates t1 = Tr(Sigma M^{-1}) and t0 = Tr(M^{-1}) for
// M = w D - lambda I - c Sigma with diagonal D and complex scalars w, c.
class TraceEvaluator {
public:
    virtual ~TraceEvaluator() = default;
    virtual void traces(cdouble w, cdouble c, cdouble& t1, cdouble& t0) const = 0;
    virtual std::string name() const = 0;
};

// Chooses among: diagonal Sigma; Sigma = s0 I + low rank; D = d0 I + sparse
// deviation (worked in the eigenbasis of Sigma); dense complex LU.
std::shared_ptr<const TraceEvaluator> make_trace_evaluator(const CovarianceModel& model, const Eigen::VectorXd& D,
                                                          double lambda);

}  // namespace ssrlab
