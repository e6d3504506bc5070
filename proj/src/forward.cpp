#include "astn/forward.hpp"

#include <cmath>

#include "astn/error.hpp"

namespace astn {

ImageBuffer q_sample(const ImageBuffer& x0, int t, const ImageBuffer& eps,
                     const NoiseSchedule& sched) {
  require_same_shape(x0, eps, "q_sample");
  const double abar = sched.alpha_bar(t);
  return axpby(std::sqrt(abar), x0, std::sqrt(1.0 - abar), eps);
}

MarginalMoments marginal_moments(const ImageBuffer& x0, int t, const NoiseSchedule& sched) {
  const double abar = sched.alpha_bar(t);
  return {scaled(x0, std::sqrt(abar)), 1.0 - abar};
}

double training_loss(const EpsilonPredictor& pred, const std::vector<ImageBuffer>& x0_batch,
                     const std::vector<ImageBuffer>& cond_batch, const NoiseSchedule& sched,
                     Rng& rng) {
  if (x0_batch.empty()) throw DomainError("training_loss: empty batch");
  if (!cond_batch.empty() && cond_batch.size() != x0_batch.size()) {
    throw DomainError("training_loss: condition batch not aligned with data batch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x0_batch.size(); ++i) {
    const ImageBuffer& x0 = x0_batch[i];
    const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
    const ImageBuffer eps = rng.normal_image(x0.width(), x0.height());
    const ImageBuffer x_t = q_sample(x0, t, eps, sched);
    const ImageBuffer* cond = cond_batch.empty() ? nullptr : &cond_batch[i];
    total += mean_squared_difference(pred.predict(x_t, t, cond, sched), eps);
  }
  return total / static_cast<double>(x0_batch.size());
}

}  // namespace astn
