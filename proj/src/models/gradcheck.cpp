#include <algorithm>
#include <cmath>
#include <string>

#include "cfsl/error.hpp"
#include "cfsl/hash.hpp"
#include "cfsl/models.hpp"

namespace cfsl {
namespace {

using Net = nn::ConvNet<double>;

// Fingerprint of every non-smooth decision in the forward pass: ReLU signs
// and max-pool winners.
std::uint64_t activation_pattern(const Net::Cache& cache) {
    Fnv1a h;
    for (const auto& st : cache.stages) {
        for (double y : st.y) {
            const unsigned char bit = y > 0.0 ? 1 : 0;
            h.update(&bit, 1);
        }
        h.update(std::span<const int>(st.argmax));
    }
    return h.digest();
}

double evaluate(Net& net, const std::vector<double>& input, int n, std::span<const int> labels, int classes,
                nn::BnMode mode, Net::Cache& cache, std::vector<double>* grad) {
    std::vector<double> logits;
    net.forward(input, n, mode, logits, &cache);
    return nn::softmax_cross_entropy<double>(logits, n, classes, labels, grad);
}

}  // namespace

GradientCheckResult finite_difference_check(const LearnerSpec& spec, std::span<const Image> probe,
                                            std::span<const int> labels, int classes,
                                            const GradientCheckOptions& options) {
    if (probe.empty() || probe.size() != labels.size()) throw ConfigError("gradient check needs one label per probe image");
    if (options.bn_mode == nn::BnMode::batch && probe.size() < 2) {
        throw ConfigError("batch-statistics gradient check needs >= 2 probe images");
    }
    const int side = probe.front().rows;
    nn::NetShape shape{side, spec.filters, spec.stages};
    Net net(shape, options.seed);
    Rng rng = Rng::derive(options.seed, {0xfd1u});
    net.reset_head(classes, &rng, 0.5);

    const int n = static_cast<int>(probe.size());
    std::vector<double> input;
    for (const auto& img : probe) {
        if (img.rows != side || img.cols != side) throw BatchError("probe images must share one square shape");
        input.insert(input.end(), img.pixels.begin(), img.pixels.end());
    }

    Net::Cache cache;
    std::vector<double> dlogits;
    evaluate(net, input, n, labels, classes, options.bn_mode, cache, &dlogits);
    const std::uint64_t base_pattern = activation_pattern(cache);
    net.zero_grad();
    net.backward(cache, dlogits);

    auto params = net.params();
    std::vector<std::vector<double>> analytic;
    std::size_t total = 0;
    for (const auto& p : params) {
        analytic.emplace_back(p.grad.begin(), p.grad.end());
        total += p.value.size();
    }

    GradientCheckResult result;
    const int max_attempts = options.parameters * 20;
    for (int attempt = 0; attempt < max_attempts && result.checked < options.parameters; ++attempt) {
        std::size_t flat = rng.uniform_index(total);
        std::size_t which = 0;
        while (flat >= params[which].value.size()) flat -= params[which++].value.size();
        double& w = params[which].value[flat];
        const double saved = w;

        Net::Cache probe_cache;
        w = saved + options.epsilon;
        const double plus = evaluate(net, input, n, labels, classes, options.bn_mode, probe_cache, nullptr);
        const bool plus_same = activation_pattern(probe_cache) == base_pattern;
        w = saved - options.epsilon;
        const double minus = evaluate(net, input, n, labels, classes, options.bn_mode, probe_cache, nullptr);
        const bool minus_same = activation_pattern(probe_cache) == base_pattern;
        w = saved;
        if (!plus_same || !minus_same) {
            ++result.skipped_at_kinks;
            continue;
        }

        const double numeric = (plus - minus) / (2.0 * options.epsilon);
        const double a = analytic[which][flat];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
        ++result.checked;
    }
    return result;
}

}  // namespace cfsl
