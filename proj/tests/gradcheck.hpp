#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "svpsf/estimator.hpp"
#include "svpsf/nn.hpp"

namespace svpsf::test {

// Worst relative disagreement between the analytic gradient of the batch loss and central
// differences, for a small double-precision network.
inline double gradient_check_worst(std::uint64_t seed = 3) {
  nn::ArchSpec spec;
  spec.input_side = 4;
  spec.stem_channels = 3;
  spec.blocks = {{4, 2}};
  spec.hidden = 5;
  spec.outputs = 3;
  nn::Network<double> net(spec);
  net.init(seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (double& p : net.params()) p += 0.05 * normal(rng);

  const int batch = 4;
  std::vector<double> input(16 * batch);
  for (double& v : input) v = normal(rng);
  // Mix valid and invalid samples so both loss branches are exercised.
  std::vector<double> targets{0.0, 0.3, 0.7, 1.0, 0.5, 0.5, 0.0, 0.9, 0.1, 0.0, 0.4, 0.6};

  std::vector<double> grad(net.param_count(), 0.0);
  batch_loss<double>(net, input, batch, targets, 1.0, grad);

  auto p = net.params();
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double h = 1e-6;
    const double x = p[i];
    p[i] = x + h;
    const double up = batch_loss<double>(net, input, batch, targets, 1.0);
    p[i] = x - h;
    const double down = batch_loss<double>(net, input, batch, targets, 1.0);
    p[i] = x;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-4});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace svpsf::test
