#include "spt2ss/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spt2ss {

double max_grad_rel_error(const std::function<Tensor()>& fn, const std::vector<Tensor>& params) {
  for (const Tensor& p : params) p.node()->grad_acc().setZero();
  Tensor loss = fn();
  if (loss.size() != 1) throw std::invalid_argument("max_grad_rel_error: fn must return a scalar");
  loss.backward();

  std::vector<Eigen::ArrayXd> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) analytic.push_back(p.node()->grad_acc());

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::ArrayXd& x = params[i].node()->data;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double x0 = x[j];
      const double h = 1e-6 * std::max(1.0, std::abs(x0));
      double fp, fm;
      {
        NoGradGuard guard;
        x[j] = x0 + h;
        fp = fn().value();
        x[j] = x0 - h;
        fm = fn().value();
        x[j] = x0;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i][j];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace spt2ss
