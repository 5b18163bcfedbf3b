#include "ser/model.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ser/csv.hpp"
#include "ser/rng.hpp"

namespace ser {

namespace {

constexpr double kStdFloor = 1e-8;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Glorot-uniform fill with a pinned draw order (row-major), so identical
// seeds give bit-identical weights.
void fill_glorot(Eigen::MatrixXd& w, double fan_in, double fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            w(r, c) = rng.uniform(-limit, limit);
        }
    }
}

void check_config(const ModelConfig& cfg) {
    if (cfg.input_dim < 1) throw std::invalid_argument("model: input_dim must be >= 1");
    if (cfg.hidden.empty()) throw std::invalid_argument("model: need at least one hidden layer");
    for (int h : cfg.hidden) {
        if (h < 1) throw std::invalid_argument("model: layer sizes must be >= 1");
    }
    if (cfg.mode == ModelMode::sequence && cfg.layer_kind != LayerKind::gated) {
        throw std::invalid_argument("model: sequence mode requires gated layers");
    }
}

}  // namespace

void Standardizer::fit(const Eigen::MatrixXd& train_rows) {
    if (train_rows.rows() < 1) throw std::invalid_argument("standardizer: empty training data");
    const double n = static_cast<double>(train_rows.rows());
    mean = train_rows.colwise().sum() / n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(train_rows.cols());
    for (Eigen::Index r = 0; r < train_rows.rows(); ++r) {
        const Eigen::VectorXd d = train_rows.row(r).transpose() - mean;
        var += d.cwiseProduct(d);
    }
    var /= n;
    std = var.cwiseSqrt().cwiseMax(kStdFloor);
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
    if (!fitted()) throw std::logic_error("standardizer not fitted");
    if (rows.cols() != mean.size()) throw std::invalid_argument("standardizer: dimension mismatch");
    Eigen::MatrixXd out = rows;
    out.rowwise() -= mean.transpose();
    out.array().rowwise() /= std.transpose().array();
    return out;
}

std::size_t parameter_count(const ModelConfig& cfg) {
    check_config(cfg);
    std::size_t count = 0;
    std::size_t in = static_cast<std::size_t>(cfg.input_dim);
    for (int h_int : cfg.hidden) {
        const std::size_t h = static_cast<std::size_t>(h_int);
        if (cfg.layer_kind == LayerKind::dense) {
            count += h * in + h;
        } else {
            count += 4 * h * in + 4 * h * h + 4 * h;
        }
        in = h;
    }
    count += static_cast<std::size_t>(ModelConfig::heads) * (in + 1);
    return count;
}

Model Model::init(const ModelConfig& cfg) {
    check_config(cfg);
    Model model;
    model.cfg_ = cfg;
    Rng rng(cfg.seed);

    int in = cfg.input_dim;
    for (int h : cfg.hidden) {
        if (cfg.layer_kind == LayerKind::dense) {
            DenseLayer layer;
            layer.weight.resize(h, in);
            fill_glorot(layer.weight, in, h, rng);
            layer.bias = Eigen::VectorXd::Zero(h);
            model.dense_.push_back(std::move(layer));
        } else {
            GatedLayer layer;
            layer.units = h;
            layer.w_input.resize(4 * h, in);
            fill_glorot(layer.w_input, in, 4.0 * h, rng);
            layer.w_recurrent.resize(4 * h, h);
            fill_glorot(layer.w_recurrent, h, 4.0 * h, rng);
            layer.bias = Eigen::VectorXd::Zero(4 * h);
            layer.bias.segment(h, h).setOnes();  // forget gate opens at init
            model.gated_.push_back(std::move(layer));
        }
        in = h;
    }
    model.head_weight.resize(ModelConfig::heads, in);
    fill_glorot(model.head_weight, in, ModelConfig::heads, rng);
    model.head_bias = Eigen::VectorXd::Zero(ModelConfig::heads);
    return model;
}

std::size_t Model::parameter_count() const { return ser::parameter_count(cfg_); }

Eigen::VectorXd Model::parameters() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    auto pack = [&flat, &pos](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) flat(pos++) = m(r, c);
        }
    };
    auto pack_vec = [&flat, &pos](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) flat(pos++) = v(i);
    };
    for (const auto& layer : dense_) {
        pack(layer.weight);
        pack_vec(layer.bias);
    }
    for (const auto& layer : gated_) {
        pack(layer.w_input);
        pack(layer.w_recurrent);
        pack_vec(layer.bias);
    }
    pack(head_weight);
    pack_vec(head_bias);
    return flat;
}

void Model::set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
        throw std::invalid_argument("set_parameters: size mismatch");
    }
    Eigen::Index pos = 0;
    auto unpack = [&flat, &pos](Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat(pos++);
        }
    };
    auto unpack_vec = [&flat, &pos](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = flat(pos++);
    };
    for (auto& layer : dense_) {
        unpack(layer.weight);
        unpack_vec(layer.bias);
    }
    for (auto& layer : gated_) {
        unpack(layer.w_input);
        unpack(layer.w_recurrent);
        unpack_vec(layer.bias);
    }
    unpack(head_weight);
    unpack_vec(head_bias);
}

namespace {

// Forward caches for one batched gated step from the zero state.
struct GatedStepCache {
    Eigen::MatrixXd input;  // N x in
    Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o;
    Eigen::MatrixXd cell, tanh_cell;
    Eigen::MatrixXd h_prev, c_prev;
    Eigen::MatrixXd output;  // N x h
};

}  // namespace

struct ModelAccess {
    static Eigen::MatrixXd gated_step(const Model::GatedLayer& layer, const Eigen::MatrixXd& x,
                                      const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& c_prev,
                                      GatedStepCache* cache, Eigen::MatrixXd* c_out) {
        const int h = layer.units;
        Eigen::MatrixXd z = x * layer.w_input.transpose() + h_prev * layer.w_recurrent.transpose();
        z.rowwise() += layer.bias.transpose();

        Eigen::MatrixXd gi = z.leftCols(h).unaryExpr([](double v) { return sigmoid(v); });
        Eigen::MatrixXd gf = z.middleCols(h, h).unaryExpr([](double v) { return sigmoid(v); });
        Eigen::MatrixXd gg = z.middleCols(2 * h, h).array().tanh().matrix();
        Eigen::MatrixXd go = z.rightCols(h).unaryExpr([](double v) { return sigmoid(v); });

        Eigen::MatrixXd c = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
        Eigen::MatrixXd tc = c.array().tanh().matrix();
        Eigen::MatrixXd out = go.cwiseProduct(tc);

        if (cache != nullptr) {
            cache->input = x;
            cache->gate_i = gi;
            cache->gate_f = gf;
            cache->gate_g = gg;
            cache->gate_o = go;
            cache->cell = c;
            cache->tanh_cell = tc;
            cache->h_prev = h_prev;
            cache->c_prev = c_prev;
            cache->output = out;
        }
        if (c_out != nullptr) *c_out = c;
        return out;
    }

    // Backward through one gated step. Returns gradient w.r.t. the step
    // input; dh_prev/dc_prev receive the recurrent carries and the parameter
    // gradients accumulate into the gw_* slots.
    static Eigen::MatrixXd gated_step_backward(const Model::GatedLayer& layer,
                                               const GatedStepCache& cache,
                                               const Eigen::MatrixXd& dh,
                                               const Eigen::MatrixXd& dc_carry,
                                               Eigen::MatrixXd& gw_input,
                                               Eigen::MatrixXd& gw_recurrent,
                                               Eigen::VectorXd& gbias, Eigen::MatrixXd& dh_prev,
                                               Eigen::MatrixXd& dc_prev) {
        const int h = layer.units;
        const Eigen::ArrayXXd tc = cache.tanh_cell.array();
        const Eigen::ArrayXXd dh_a = dh.array();

        Eigen::ArrayXXd dc =
            dc_carry.array() + dh_a * cache.gate_o.array() * (1.0 - tc * tc);
        const Eigen::ArrayXXd d_o = dh_a * tc;
        const Eigen::ArrayXXd d_i = dc * cache.gate_g.array();
        const Eigen::ArrayXXd d_g = dc * cache.gate_i.array();
        const Eigen::ArrayXXd d_f = dc * cache.c_prev.array();
        dc_prev = (dc * cache.gate_f.array()).matrix();

        const Eigen::ArrayXXd gi = cache.gate_i.array();
        const Eigen::ArrayXXd gf = cache.gate_f.array();
        const Eigen::ArrayXXd gg = cache.gate_g.array();
        const Eigen::ArrayXXd go = cache.gate_o.array();

        Eigen::MatrixXd dz(dh.rows(), 4 * h);
        dz.leftCols(h) = (d_i * gi * (1.0 - gi)).matrix();
        dz.middleCols(h, h) = (d_f * gf * (1.0 - gf)).matrix();
        dz.middleCols(2 * h, h) = (d_g * (1.0 - gg * gg)).matrix();
        dz.rightCols(h) = (d_o * go * (1.0 - go)).matrix();

        gw_input += dz.transpose() * cache.input;
        gw_recurrent += dz.transpose() * cache.h_prev;
        gbias += dz.colwise().sum().transpose();
        dh_prev = dz * layer.w_recurrent;
        return dz * layer.w_input;
    }
};

Eigen::MatrixXd Model::forward(const Eigen::MatrixXd& batch) const {
    if (cfg_.mode != ModelMode::vector) {
        throw std::logic_error("vector forward called on a sequence-mode model");
    }
    if (batch.cols() != cfg_.input_dim) throw std::invalid_argument("forward: input dim mismatch");
    Eigen::MatrixXd a = standardizer_.apply(batch);
    if (cfg_.layer_kind == LayerKind::dense) {
        for (const auto& layer : dense_) {
            Eigen::MatrixXd z = a * layer.weight.transpose();
            z.rowwise() += layer.bias.transpose();
            a = z.array().tanh().matrix();
        }
    } else {
        for (const auto& layer : gated_) {
            const Eigen::MatrixXd zero_state = Eigen::MatrixXd::Zero(a.rows(), layer.units);
            a = ModelAccess::gated_step(layer, a, zero_state, zero_state, nullptr, nullptr);
        }
    }
    Eigen::MatrixXd preds = a * head_weight.transpose();
    preds.rowwise() += head_bias.transpose();
    return preds;
}

Eigen::MatrixXd Model::forward(const std::vector<Eigen::MatrixXd>& sequences) const {
    if (cfg_.mode != ModelMode::sequence) {
        throw std::logic_error("sequence forward called on a vector-mode model");
    }
    const std::size_t n = sequences.size();
    Eigen::MatrixXd final_hidden(static_cast<Eigen::Index>(n), cfg_.hidden.back());
    for (std::size_t s = 0; s < n; ++s) {
        const Eigen::MatrixXd x = standardizer_.apply(sequences[s]);
        if (x.rows() < 1) throw std::invalid_argument("forward: empty sequence");
        std::vector<Eigen::MatrixXd> h_state, c_state;
        for (const auto& layer : gated_) {
            h_state.emplace_back(Eigen::MatrixXd::Zero(1, layer.units));
            c_state.emplace_back(Eigen::MatrixXd::Zero(1, layer.units));
        }
        for (Eigen::Index t = 0; t < x.rows(); ++t) {
            Eigen::MatrixXd frame = x.row(t);
            for (std::size_t l = 0; l < gated_.size(); ++l) {
                Eigen::MatrixXd c_next;
                frame = ModelAccess::gated_step(gated_[l], frame, h_state[l], c_state[l], nullptr,
                                                &c_next);
                h_state[l] = frame;
                c_state[l] = c_next;
            }
        }
        final_hidden.row(static_cast<Eigen::Index>(s)) = h_state.back();
    }
    Eigen::MatrixXd preds = final_hidden * head_weight.transpose();
    preds.rowwise() += head_bias.transpose();
    return preds;
}

Eigen::VectorXd Model::gradient(const Eigen::MatrixXd& batch, const Eigen::MatrixXd& truths,
                                const TaskWeights& w, double* loss_out) const {
    if (cfg_.mode != ModelMode::vector) {
        throw std::logic_error("vector gradient called on a sequence-mode model");
    }
    if (batch.rows() < 2) throw std::invalid_argument("gradient: need a batch of at least 2");

    const Eigen::MatrixXd x0 = standardizer_.apply(batch);

    std::vector<Eigen::MatrixXd> activations;  // dense path
    std::vector<GatedStepCache> caches;        // gated path
    Eigen::MatrixXd a = x0;
    if (cfg_.layer_kind == LayerKind::dense) {
        activations.push_back(a);
        for (const auto& layer : dense_) {
            Eigen::MatrixXd z = a * layer.weight.transpose();
            z.rowwise() += layer.bias.transpose();
            a = z.array().tanh().matrix();
            activations.push_back(a);
        }
    } else {
        caches.resize(gated_.size());
        for (std::size_t l = 0; l < gated_.size(); ++l) {
            const Eigen::MatrixXd zero_state = Eigen::MatrixXd::Zero(a.rows(), gated_[l].units);
            a = ModelAccess::gated_step(gated_[l], a, zero_state, zero_state, &caches[l], nullptr);
        }
    }
    Eigen::MatrixXd preds = a * head_weight.transpose();
    preds.rowwise() += head_bias.transpose();

    if (loss_out != nullptr) *loss_out = multitask_loss(preds, truths, w);
    const Eigen::MatrixXd dpred = multitask_loss_gradient(preds, truths, w);

    Eigen::MatrixXd ghead_w = dpred.transpose() * a;
    Eigen::VectorXd ghead_b = dpred.colwise().sum().transpose();
    Eigen::MatrixXd da = dpred * head_weight;

    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    auto pack = [&flat, &pos](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) flat(pos++) = m(r, c);
        }
    };
    auto pack_vec = [&flat, &pos](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) flat(pos++) = v(i);
    };

    if (cfg_.layer_kind == LayerKind::dense) {
        std::vector<Eigen::MatrixXd> grad_w(dense_.size());
        std::vector<Eigen::VectorXd> grad_b(dense_.size());
        for (std::size_t li = dense_.size(); li-- > 0;) {
            const Eigen::MatrixXd& out = activations[li + 1];
            const Eigen::MatrixXd dz =
                (da.array() * (1.0 - out.array() * out.array())).matrix();
            grad_w[li] = dz.transpose() * activations[li];
            grad_b[li] = dz.colwise().sum().transpose();
            da = dz * dense_[li].weight;
        }
        for (std::size_t li = 0; li < dense_.size(); ++li) {
            pack(grad_w[li]);
            pack_vec(grad_b[li]);
        }
    } else {
        std::vector<Eigen::MatrixXd> gw_in(gated_.size()), gw_rec(gated_.size());
        std::vector<Eigen::VectorXd> gb(gated_.size());
        for (std::size_t li = gated_.size(); li-- > 0;) {
            const auto& layer = gated_[li];
            gw_in[li] = Eigen::MatrixXd::Zero(layer.w_input.rows(), layer.w_input.cols());
            gw_rec[li] = Eigen::MatrixXd::Zero(layer.w_recurrent.rows(), layer.w_recurrent.cols());
            gb[li] = Eigen::VectorXd::Zero(layer.bias.size());
            Eigen::MatrixXd dh_prev, dc_prev;
            const Eigen::MatrixXd dc_zero = Eigen::MatrixXd::Zero(da.rows(), layer.units);
            da = ModelAccess::gated_step_backward(layer, caches[li], da, dc_zero, gw_in[li],
                                                  gw_rec[li], gb[li], dh_prev, dc_prev);
        }
        for (std::size_t li = 0; li < gated_.size(); ++li) {
            pack(gw_in[li]);
            pack(gw_rec[li]);
            pack_vec(gb[li]);
        }
    }
    pack(ghead_w);
    pack_vec(ghead_b);
    return flat;
}

Eigen::VectorXd Model::gradient(const std::vector<Eigen::MatrixXd>& sequences,
                                const Eigen::MatrixXd& truths, const TaskWeights& w,
                                double* loss_out) const {
    if (cfg_.mode != ModelMode::sequence) {
        throw std::logic_error("sequence gradient called on a vector-mode model");
    }
    const std::size_t n = sequences.size();
    if (n < 2) throw std::invalid_argument("gradient: need a batch of at least 2");
    const std::size_t n_layers = gated_.size();

    // Forward with full caches: per sequence, per timestep, per layer.
    std::vector<std::vector<std::vector<GatedStepCache>>> caches(n);
    Eigen::MatrixXd final_hidden(static_cast<Eigen::Index>(n), cfg_.hidden.back());
    for (std::size_t s = 0; s < n; ++s) {
        const Eigen::MatrixXd x = standardizer_.apply(sequences[s]);
        const Eigen::Index steps = x.rows();
        if (steps < 1) throw std::invalid_argument("gradient: empty sequence");
        caches[s].resize(static_cast<std::size_t>(steps),
                         std::vector<GatedStepCache>(n_layers));
        std::vector<Eigen::MatrixXd> h_state, c_state;
        for (const auto& layer : gated_) {
            h_state.emplace_back(Eigen::MatrixXd::Zero(1, layer.units));
            c_state.emplace_back(Eigen::MatrixXd::Zero(1, layer.units));
        }
        for (Eigen::Index t = 0; t < steps; ++t) {
            Eigen::MatrixXd frame = x.row(t);
            for (std::size_t l = 0; l < n_layers; ++l) {
                Eigen::MatrixXd c_next;
                frame = ModelAccess::gated_step(gated_[l], frame, h_state[l], c_state[l],
                                                &caches[s][static_cast<std::size_t>(t)][l], &c_next);
                h_state[l] = frame;
                c_state[l] = c_next;
            }
        }
        final_hidden.row(static_cast<Eigen::Index>(s)) = h_state.back();
    }
    Eigen::MatrixXd preds = final_hidden * head_weight.transpose();
    preds.rowwise() += head_bias.transpose();

    if (loss_out != nullptr) *loss_out = multitask_loss(preds, truths, w);
    const Eigen::MatrixXd dpred = multitask_loss_gradient(preds, truths, w);

    Eigen::MatrixXd ghead_w = dpred.transpose() * final_hidden;
    Eigen::VectorXd ghead_b = dpred.colwise().sum().transpose();
    const Eigen::MatrixXd dfinal = dpred * head_weight;

    std::vector<Eigen::MatrixXd> gw_in(n_layers), gw_rec(n_layers);
    std::vector<Eigen::VectorXd> gb(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        gw_in[l] = Eigen::MatrixXd::Zero(gated_[l].w_input.rows(), gated_[l].w_input.cols());
        gw_rec[l] =
            Eigen::MatrixXd::Zero(gated_[l].w_recurrent.rows(), gated_[l].w_recurrent.cols());
        gb[l] = Eigen::VectorXd::Zero(gated_[l].bias.size());
    }

    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t steps = caches[s].size();
        std::vector<Eigen::MatrixXd> dh_carry(n_layers), dc_carry(n_layers);
        for (std::size_t l = 0; l < n_layers; ++l) {
            dh_carry[l] = Eigen::MatrixXd::Zero(1, gated_[l].units);
            dc_carry[l] = Eigen::MatrixXd::Zero(1, gated_[l].units);
        }
        for (std::size_t t = steps; t-- > 0;) {
            Eigen::MatrixXd from_above = Eigen::MatrixXd::Zero(1, gated_.back().units);
            if (t == steps - 1) from_above = dfinal.row(static_cast<Eigen::Index>(s));
            for (std::size_t l = n_layers; l-- > 0;) {
                const Eigen::MatrixXd dh = dh_carry[l] + from_above;
                Eigen::MatrixXd dh_prev, dc_prev;
                from_above = ModelAccess::gated_step_backward(gated_[l], caches[s][t][l], dh,
                                                              dc_carry[l], gw_in[l], gw_rec[l],
                                                              gb[l], dh_prev, dc_prev);
                dh_carry[l] = dh_prev;
                dc_carry[l] = dc_prev;
            }
        }
    }

    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    auto pack = [&flat, &pos](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) flat(pos++) = m(r, c);
        }
    };
    auto pack_vec = [&flat, &pos](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) flat(pos++) = v(i);
    };
    for (std::size_t l = 0; l < n_layers; ++l) {
        pack(gw_in[l]);
        pack(gw_rec[l]);
        pack_vec(gb[l]);
    }
    pack(ghead_w);
    pack_vec(ghead_b);
    return flat;
}

Eigen::Index DataView::size() const {
    return sequences.empty() ? x.rows() : static_cast<Eigen::Index>(sequences.size());
}

namespace {

double view_loss(const Model& model, const DataView& view, const TaskWeights& w) {
    const Eigen::MatrixXd preds =
        view.sequences.empty() ? model.forward(view.x) : model.forward(view.sequences);
    return multitask_loss(preds, view.y, w);
}

CccReport view_report(const Model& model, const DataView& view) {
    const Eigen::MatrixXd preds =
        view.sequences.empty() ? model.forward(view.x) : model.forward(view.sequences);
    return evaluate(preds, view.y);
}

}  // namespace

TrainResult train(Model model, const DataView& train_set, const DataView& val_set,
                  const TrainConfig& tc) {
    if (train_set.size() < 2 || val_set.size() < 1) {
        throw std::invalid_argument("train: empty split");
    }
    if (tc.patience >= tc.max_epochs) {
        throw std::invalid_argument("train: patience must be smaller than max_epochs");
    }

    Eigen::VectorXd params = model.parameters();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_params = params;
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        double train_loss = 0.0;
        const Eigen::VectorXd grad =
            train_set.sequences.empty()
                ? model.gradient(train_set.x, train_set.y, tc.weights, &train_loss)
                : model.gradient(train_set.sequences, train_set.y, tc.weights, &train_loss);

        if (!std::isfinite(train_loss) || !grad.allFinite()) {
            std::ostringstream msg;
            msg << "train: non-finite loss at epoch " << epoch << " (loss " << train_loss
                << ", batch " << train_set.size() << " rows, grad norm "
                << (grad.allFinite() ? grad.norm() : std::numeric_limits<double>::quiet_NaN())
                << ")";
            throw std::runtime_error(msg.str());
        }

        const double t = static_cast<double>(epoch);
        m = tc.beta1 * m + (1.0 - tc.beta1) * grad;
        v = tc.beta2 * v + (1.0 - tc.beta2) * grad.cwiseProduct(grad);
        const double m_corr = 1.0 - std::pow(tc.beta1, t);
        const double v_corr = 1.0 - std::pow(tc.beta2, t);
        for (Eigen::Index i = 0; i < params.size(); ++i) {
            params(i) -= tc.learning_rate * (m(i) / m_corr) /
                         (std::sqrt(v(i) / v_corr) + tc.epsilon);
        }
        model.set_parameters(params);

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = train_loss;
        stats.val_loss = view_loss(model, val_set, tc.weights);
        stats.val_report = view_report(model, val_set);
        if (!std::isfinite(stats.val_loss)) {
            throw std::runtime_error("train: non-finite validation loss at epoch " +
                                     std::to_string(epoch));
        }
        result.history.push_back(stats);

        if (stats.val_loss < result.best_val_loss) {
            result.best_val_loss = stats.val_loss;
            result.best_epoch = epoch;
            best_params = params;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= tc.patience) break;
        }
    }

    model.set_parameters(best_params);
    result.best_model = std::move(model);
    return result;
}

CccReport predict_and_evaluate(const Model& model, const DataView& test_set) {
    return view_report(model, test_set);
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    CsvTable table;
    table.header = {"epoch", "train_loss", "val_loss", "val_ccc_v", "val_ccc_a", "val_ccc_d"};
    for (const auto& e : history) {
        table.rows.push_back({std::to_string(e.epoch), format_double(e.train_loss),
                              format_double(e.val_loss), format_double(e.val_report.valence),
                              format_double(e.val_report.arousal),
                              format_double(e.val_report.dominance)});
    }
    write_csv(path, table);
}

namespace {

std::string kind_name(LayerKind k) { return k == LayerKind::dense ? "dense" : "gated"; }
std::string mode_name(ModelMode m) { return m == ModelMode::vector ? "vector" : "sequence"; }

}  // namespace

std::string Model::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["config"] = {{"input_dim", cfg_.input_dim},
                   {"hidden", cfg_.hidden},
                   {"layer_kind", kind_name(cfg_.layer_kind)},
                   {"mode", mode_name(cfg_.mode)},
                   {"seed", cfg_.seed}};
    if (standardizer_.fitted()) {
        j["standardizer"] = {
            {"mean", std::vector<double>(standardizer_.mean.data(),
                                         standardizer_.mean.data() + standardizer_.mean.size())},
            {"std", std::vector<double>(standardizer_.std.data(),
                                        standardizer_.std.data() + standardizer_.std.size())}};
    }
    const Eigen::VectorXd flat = parameters();
    j["parameters"] = std::vector<double>(flat.data(), flat.data() + flat.size());
    return j.dump();
}

Model Model::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1) {
        throw std::runtime_error("unsupported model checkpoint version");
    }
    ModelConfig cfg;
    const auto& jc = j.at("config");
    cfg.input_dim = jc.at("input_dim").get<int>();
    cfg.hidden = jc.at("hidden").get<std::vector<int>>();
    cfg.layer_kind = jc.at("layer_kind").get<std::string>() == "dense" ? LayerKind::dense
                                                                       : LayerKind::gated;
    cfg.mode =
        jc.at("mode").get<std::string>() == "vector" ? ModelMode::vector : ModelMode::sequence;
    cfg.seed = jc.at("seed").get<std::uint64_t>();

    Model model = Model::init(cfg);
    if (j.contains("standardizer")) {
        const auto mean = j["standardizer"].at("mean").get<std::vector<double>>();
        const auto sd = j["standardizer"].at("std").get<std::vector<double>>();
        model.standardizer_.mean =
            Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        model.standardizer_.std =
            Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    }
    const auto flat = j.at("parameters").get<std::vector<double>>();
    model.set_parameters(
        Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size())));
    return model;
}

}  // namespace ser
