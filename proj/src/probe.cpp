#include "plae/probe.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "plae/rng.hpp"

namespace plae {
namespace {

// standardized row-major [N,dim] in double
std::vector<double> standardize(const Tensor& encodings, const std::vector<double>& mean,
                                const std::vector<double>& scale) {
    const int n = encodings.shape()[0];
    const int d = encodings.shape()[1];
    std::vector<double> x(std::size_t(n) * d);
    auto raw = encodings.data();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            x[std::size_t(i) * d + j] =
                (double(raw[std::size_t(i) * d + j]) - mean[size_t(j)]) / scale[size_t(j)];
        }
    }
    return x;
}

std::vector<double> scores_for(const LinearProbe& probe, const std::vector<double>& x, int n) {
    std::vector<double> s(std::size_t(n) * probe.classes, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < probe.dim; ++j) {
            const double v = x[std::size_t(i) * probe.dim + j];
            if (v == 0.0) continue;
            for (int c = 0; c < probe.classes; ++c) {
                s[std::size_t(i) * probe.classes + c] += v * probe.weight[std::size_t(j) * probe.classes + c];
            }
        }
        for (int c = 0; c < probe.classes; ++c) {
            s[std::size_t(i) * probe.classes + c] += probe.bias[size_t(c)];
        }
    }
    return s;
}

void fit_logistic(LinearProbe& probe, const std::vector<double>& x, const std::vector<int>& labels,
                  int n) {
    const int d = probe.dim, c = probe.classes;
    const double lr = probe.settings.learning_rate;
    const double lambda = probe.settings.lambda;
    std::vector<double> gw(probe.weight.size());
    std::vector<double> gb(probe.bias.size());
    std::vector<double> prob(static_cast<std::size_t>(c));
    for (int iter = 0; iter < probe.settings.max_iters; ++iter) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            double mx = -1e300;
            for (int k = 0; k < c; ++k) {
                double s = probe.bias[size_t(k)];
                for (int j = 0; j < d; ++j) {
                    s += x[std::size_t(i) * d + j] * probe.weight[std::size_t(j) * c + k];
                }
                prob[size_t(k)] = s;
                mx = std::max(mx, s);
            }
            double sum = 0.0;
            for (int k = 0; k < c; ++k) {
                prob[size_t(k)] = std::exp(prob[size_t(k)] - mx);
                sum += prob[size_t(k)];
            }
            for (int k = 0; k < c; ++k) {
                const double delta = prob[size_t(k)] / sum - (k == labels[size_t(i)] ? 1.0 : 0.0);
                gb[size_t(k)] += delta;
                for (int j = 0; j < d; ++j) {
                    gw[std::size_t(j) * c + k] += delta * x[std::size_t(i) * d + j];
                }
            }
        }
        const double inv_n = 1.0 / double(n);
        for (std::size_t j = 0; j < probe.weight.size(); ++j) {
            probe.weight[j] -= lr * (gw[j] * inv_n + 2.0 * lambda * probe.weight[j]);
        }
        for (std::size_t k = 0; k < probe.bias.size(); ++k) {
            probe.bias[k] -= lr * gb[k] * inv_n;
        }
    }
}

// One-vs-rest hinge loss by full-batch subgradient descent.
void fit_svm(LinearProbe& probe, const std::vector<double>& x, const std::vector<int>& labels,
             int n) {
    const int d = probe.dim, c = probe.classes;
    const double lr = probe.settings.learning_rate;
    const double lambda = probe.settings.lambda;
    for (int k = 0; k < c; ++k) {
        for (int iter = 0; iter < probe.settings.max_iters; ++iter) {
            std::vector<double> gw(size_t(d), 0.0);
            double gb = 0.0;
            for (int i = 0; i < n; ++i) {
                const double y = labels[size_t(i)] == k ? 1.0 : -1.0;
                double s = probe.bias[size_t(k)];
                for (int j = 0; j < d; ++j) {
                    s += x[std::size_t(i) * d + j] * probe.weight[std::size_t(j) * c + k];
                }
                if (y * s < 1.0) {
                    for (int j = 0; j < d; ++j) gw[size_t(j)] -= y * x[std::size_t(i) * d + j];
                    gb -= y;
                }
            }
            const double inv_n = 1.0 / double(n);
            for (int j = 0; j < d; ++j) {
                probe.weight[std::size_t(j) * c + k] -=
                    lr * (gw[size_t(j)] * inv_n + 2.0 * lambda * probe.weight[std::size_t(j) * c + k]);
            }
            probe.bias[size_t(k)] -= lr * gb * inv_n;
        }
    }
}

} // namespace

std::string probe_solver_name(ProbeSolver solver) {
    return solver == ProbeSolver::Logistic ? "logistic" : "linear_svm";
}

std::vector<int> LinearProbe::predict(const Tensor& encodings) const {
    if (encodings.shape().size() != 2 || encodings.shape()[1] != dim) {
        throw ShapeError("probe expects [N," + std::to_string(dim) + "] encodings, got " +
                         shape_str(encodings.shape()));
    }
    const int n = encodings.shape()[0];
    const auto x = standardize(encodings, mean, scale);
    const auto s = scores_for(*this, x, n);
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int best = 0;
        double bv = s[std::size_t(i) * classes];
        for (int c = 1; c < classes; ++c) {
            const double v = s[std::size_t(i) * classes + c];
            if (v > bv) { // strict: ties keep the lowest class index
                bv = v;
                best = c;
            }
        }
        out[size_t(i)] = best;
    }
    return out;
}

std::pair<Tensor, std::vector<int>> encode_split(const Encoder& encoder, const Dataset& split,
                                                 int batch_size) {
    const int n = split.size();
    const int d = encoder.embedding_dim();
    Tensor out = Tensor::zeros({n, d});
    std::vector<int> labels(static_cast<std::size_t>(n));
    std::vector<int> idx;
    for (int start = 0; start < n; start += batch_size) {
        const int count = std::min(batch_size, n - start);
        idx.resize(size_t(count));
        for (int i = 0; i < count; ++i) idx[size_t(i)] = start + i;
        Tensor z = encode(encoder, split.gather(idx));
        std::copy_n(z.data().data(), std::size_t(count) * d,
                    out.data().data() + std::size_t(start) * d);
    }
    for (int i = 0; i < n; ++i) labels[size_t(i)] = split.label(i);
    return {std::move(out), std::move(labels)};
}

LinearProbe fit_probe(const Tensor& encodings, const std::vector<int>& labels,
                      const ProbeSettings& settings) {
    if (encodings.shape().size() != 2) {
        throw ShapeError("fit_probe expects [N,d] encodings");
    }
    const int n = encodings.shape()[0];
    const int d = encodings.shape()[1];
    if (int(labels.size()) != n) throw ShapeError("fit_probe: label count mismatch");
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw ConfigError("fit_probe requires at least two classes in the training set");
    }
    const int classes = *distinct.rbegin() + 1;

    LinearProbe probe;
    probe.dim = d;
    probe.classes = classes;
    probe.settings = settings;
    probe.mean.assign(size_t(d), 0.0);
    probe.scale.assign(size_t(d), 0.0);
    auto raw = encodings.data();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) probe.mean[size_t(j)] += double(raw[std::size_t(i) * d + j]);
    }
    for (auto& m : probe.mean) m /= double(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            const double dev = double(raw[std::size_t(i) * d + j]) - probe.mean[size_t(j)];
            probe.scale[size_t(j)] += dev * dev;
        }
    }
    for (auto& s : probe.scale) s = std::max(std::sqrt(s / double(n)), 1e-6);

    Rng rng(settings.seed);
    probe.weight.resize(std::size_t(d) * classes);
    probe.bias.assign(size_t(classes), 0.0);
    for (auto& w : probe.weight) w = double(rng.normal(0.0f, 0.01f));

    const auto x = standardize(encodings, probe.mean, probe.scale);
    if (settings.solver == ProbeSolver::Logistic) {
        fit_logistic(probe, x, labels, n);
    } else {
        fit_svm(probe, x, labels, n);
    }
    return probe;
}

double probe_accuracy(const LinearProbe& probe, const Tensor& encodings,
                      const std::vector<int>& labels) {
    const int n = encodings.shape().empty() ? 0 : encodings.shape()[0];
    if (n == 0) throw ConfigError("probe_accuracy on an empty test set");
    if (int(labels.size()) != n) throw ShapeError("probe_accuracy: label count mismatch");
    const auto pred = probe.predict(encodings);
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        if (pred[size_t(i)] == labels[size_t(i)]) ++correct;
    }
    return double(correct) / double(n);
}

double evaluate_probe(const Encoder& encoder, const Dataset& train, const Dataset& test,
                      const ProbeSettings& settings) {
    auto [train_enc, train_labels] = encode_split(encoder, train);
    auto [test_enc, test_labels] = encode_split(encoder, test);
    const std::uint64_t test_reads_before = test.label_reads();
    LinearProbe probe = fit_probe(train_enc, train_labels, settings);
    if (test.label_reads() != test_reads_before) {
        throw std::logic_error("probe fitting touched test labels");
    }
    return probe_accuracy(probe, test_enc, test_labels);
}

} // namespace plae
