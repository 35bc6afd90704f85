#include "detox/reference_model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace detox {

namespace {

void fill_normal(Eigen::MatrixXd& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

Eigen::VectorXd tanh_of(const Eigen::VectorXd& x) { return x.array().tanh().matrix(); }

Eigen::VectorXd tanh_grad(const Eigen::VectorXd& y, const Eigen::VectorXd& upstream) {
  return (upstream.array() * (1.0 - y.array().square())).matrix();
}

Eigen::VectorXd stack(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

std::vector<Eigen::Map<Eigen::VectorXd>> ReferenceModel::Params::views() {
  std::vector<Eigen::Map<Eigen::VectorXd>> out;
  auto add = [&](auto& m) { out.emplace_back(m.data(), m.size()); };
  add(embed);
  add(positions);
  add(w1);
  add(b1);
  add(w2);
  add(b2);
  add(wq);
  add(bq);
  add(wc);
  add(bc);
  add(wo);
  add(bo);
  return out;
}

void ReferenceModel::Params::set_zero_like(const Params& shape) {
  embed = Eigen::MatrixXd::Zero(shape.embed.rows(), shape.embed.cols());
  positions = Eigen::MatrixXd::Zero(shape.positions.rows(), shape.positions.cols());
  w1 = Eigen::MatrixXd::Zero(shape.w1.rows(), shape.w1.cols());
  b1 = Eigen::VectorXd::Zero(shape.b1.size());
  w2 = Eigen::MatrixXd::Zero(shape.w2.rows(), shape.w2.cols());
  b2 = Eigen::VectorXd::Zero(shape.b2.size());
  wq = Eigen::MatrixXd::Zero(shape.wq.rows(), shape.wq.cols());
  bq = Eigen::VectorXd::Zero(shape.bq.size());
  wc = Eigen::MatrixXd::Zero(shape.wc.rows(), shape.wc.cols());
  bc = Eigen::VectorXd::Zero(shape.bc.size());
  wo = Eigen::MatrixXd::Zero(shape.wo.rows(), shape.wo.cols());
  bo = Eigen::VectorXd::Zero(shape.bo.size());
}

ReferenceModel::ReferenceModel(std::size_t vocab, std::size_t hidden, std::size_t max_positions,
                               std::uint64_t seed) {
  if (vocab == 0 || hidden == 0 || max_positions == 0) {
    throw Error("reference model dimensions must be positive");
  }
  const auto v = static_cast<Eigen::Index>(vocab);
  const auto d = static_cast<Eigen::Index>(hidden);
  const auto t = static_cast<Eigen::Index>(max_positions);
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  params_.embed.resize(v, d);
  params_.positions.resize(t, d);
  params_.w1.resize(d, 2 * d);
  params_.w2.resize(d, d);
  params_.wq.resize(d, 2 * d);
  params_.wc.resize(d, 2 * d);
  params_.wo.resize(v, d);
  fill_normal(params_.embed, 0.5, rng);
  fill_normal(params_.positions, 0.5, rng);
  fill_normal(params_.w1, scale, rng);
  fill_normal(params_.w2, scale, rng);
  fill_normal(params_.wq, scale, rng);
  fill_normal(params_.wc, scale, rng);
  fill_normal(params_.wo, scale, rng);
  params_.b1 = Eigen::VectorXd::Zero(d);
  params_.b2 = Eigen::VectorXd::Zero(d);
  params_.bq = Eigen::VectorXd::Zero(d);
  params_.bc = Eigen::VectorXd::Zero(d);
  params_.bo = Eigen::VectorXd::Zero(v);
}

void ReferenceModel::resize_vocabulary(std::size_t new_vocab, std::uint64_t seed) {
  const auto old_rows = params_.embed.rows();
  const auto rows = static_cast<Eigen::Index>(new_vocab);
  if (rows < old_rows) throw Error("vocabulary can only grow");
  if (rows == old_rows) return;
  const auto d = params_.embed.cols();
  std::mt19937_64 rng(seed ^ (0xA5A5A5A5ULL + static_cast<std::uint64_t>(old_rows)));
  Eigen::MatrixXd fresh_embed(rows - old_rows, d);
  Eigen::MatrixXd fresh_out(rows - old_rows, d);
  fill_normal(fresh_embed, 0.5, rng);
  fill_normal(fresh_out, 1.0 / std::sqrt(static_cast<double>(d)), rng);

  Eigen::MatrixXd embed(rows, d);
  embed << params_.embed, fresh_embed;
  Eigen::MatrixXd wo(rows, d);
  wo << params_.wo, fresh_out;
  Eigen::VectorXd bo = Eigen::VectorXd::Zero(rows);
  bo.head(old_rows) = params_.bo;
  params_.embed = std::move(embed);
  params_.wo = std::move(wo);
  params_.bo = std::move(bo);
}

Eigen::MatrixXd ReferenceModel::encode(const std::vector<TokenId>& source, Eigen::MatrixXd* pre_u,
                                       Eigen::MatrixXd* pre_v) const {
  const auto d = params_.embed.cols();
  const auto n = static_cast<Eigen::Index>(source.size());
  if (source.empty()) throw Error("empty source sequence");
  if (n > params_.positions.rows()) throw Error("source longer than the position table");
  Eigen::MatrixXd states(d, n);
  if (pre_u) pre_u->resize(d, n);
  if (pre_v) pre_v->resize(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TokenId id = source[static_cast<std::size_t>(i)];
    if (id < 0 || id >= params_.embed.rows()) throw Error("source token id out of range");
    Eigen::VectorXd a = stack(params_.embed.row(id).transpose(), params_.positions.row(i).transpose());
    Eigen::VectorXd u = tanh_of(params_.w1 * a + params_.b1);
    Eigen::VectorXd v = tanh_of(params_.w2 * u + params_.b2);
    states.col(i) = u + v;
    if (pre_u) pre_u->col(i) = u;
    if (pre_v) pre_v->col(i) = v;
  }
  return states;
}

double ReferenceModel::loss(const std::vector<TokenId>& source, const std::vector<TokenId>& target,
                            Params* grads, double weight) const {
  const auto d = params_.embed.cols();
  const auto steps = static_cast<Eigen::Index>(target.size());
  if (target.empty()) throw Error("empty target sequence");
  if (steps > params_.positions.rows()) throw Error("target longer than the position table");
  Eigen::MatrixXd u_states, v_states;
  const Eigen::MatrixXd states = encode(source, &u_states, &v_states);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double scale = weight / static_cast<double>(steps);

  Eigen::MatrixXd d_states;
  if (grads) d_states = Eigen::MatrixXd::Zero(states.rows(), states.cols());

  double total = 0.0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const TokenId prev = t == 0 ? ByteTokenizer::kBos : target[static_cast<std::size_t>(t - 1)];
    const TokenId gold = target[static_cast<std::size_t>(t)];
    if (gold < 0 || gold >= params_.embed.rows()) throw Error("target token id out of range");
    Eigen::VectorXd g = stack(params_.embed.row(prev).transpose(), params_.positions.row(t).transpose());
    Eigen::VectorXd q = tanh_of(params_.wq * g + params_.bq);
    Eigen::VectorXd attn = softmax(states.transpose() * q * inv_sqrt_d);
    Eigen::VectorXd context = states * attn;
    Eigen::VectorXd k = stack(q, context);
    Eigen::VectorXd o = tanh_of(params_.wc * k + params_.bc);
    Eigen::VectorXd z = params_.wo * o + params_.bo;
    const double max_z = z.maxCoeff();
    const double log_norm = max_z + std::log((z.array() - max_z).exp().sum());
    total += log_norm - z(gold);
    if (!grads) continue;

    Eigen::VectorXd dz = (z.array() - log_norm).exp().matrix();
    dz(gold) -= 1.0;
    dz *= scale;
    grads->wo.noalias() += dz * o.transpose();
    grads->bo += dz;
    Eigen::VectorXd d_o_pre = tanh_grad(o, params_.wo.transpose() * dz);
    grads->wc.noalias() += d_o_pre * k.transpose();
    grads->bc += d_o_pre;
    Eigen::VectorXd dk = params_.wc.transpose() * d_o_pre;
    Eigen::VectorXd dq = dk.head(d);
    Eigen::VectorXd d_context = dk.tail(d);
    d_states.noalias() += d_context * attn.transpose();
    Eigen::VectorXd d_attn = states.transpose() * d_context;
    Eigen::VectorXd d_scores = (attn.array() * (d_attn.array() - attn.dot(d_attn))).matrix();
    d_states.noalias() += q * d_scores.transpose() * inv_sqrt_d;
    dq.noalias() += states * d_scores * inv_sqrt_d;
    Eigen::VectorXd d_q_pre = tanh_grad(q, dq);
    grads->wq.noalias() += d_q_pre * g.transpose();
    grads->bq += d_q_pre;
    Eigen::VectorXd dg = params_.wq.transpose() * d_q_pre;
    grads->embed.row(prev) += dg.head(d).transpose();
    grads->positions.row(t) += dg.tail(d).transpose();
  }

  if (grads) {
    for (Eigen::Index i = 0; i < states.cols(); ++i) {
      const TokenId id = source[static_cast<std::size_t>(i)];
      Eigen::VectorXd u = u_states.col(i);
      Eigen::VectorXd v = v_states.col(i);
      Eigen::VectorXd dh = d_states.col(i);
      Eigen::VectorXd d_v_pre = tanh_grad(v, dh);
      grads->w2.noalias() += d_v_pre * u.transpose();
      grads->b2 += d_v_pre;
      Eigen::VectorXd du = dh + params_.w2.transpose() * d_v_pre;
      Eigen::VectorXd d_u_pre = tanh_grad(u, du);
      Eigen::VectorXd a = stack(params_.embed.row(id).transpose(), params_.positions.row(i).transpose());
      grads->w1.noalias() += d_u_pre * a.transpose();
      grads->b1 += d_u_pre;
      Eigen::VectorXd da = params_.w1.transpose() * d_u_pre;
      grads->embed.row(id) += da.head(d).transpose();
      grads->positions.row(i) += da.tail(d).transpose();
    }
  }
  return total / static_cast<double>(steps);
}

ReferenceModel::Decoder::Decoder(const ReferenceModel& model, const std::vector<TokenId>& source)
    : model_(model), states_(model.encode(source, nullptr, nullptr)) {}

Eigen::VectorXd ReferenceModel::Decoder::logits(TokenId previous, std::size_t step) const {
  const auto& p = model_.params_;
  const auto d = p.embed.cols();
  if (static_cast<Eigen::Index>(step) >= p.positions.rows()) throw Error("decoder step beyond position table");
  Eigen::VectorXd g = stack(p.embed.row(previous).transpose(),
                            p.positions.row(static_cast<Eigen::Index>(step)).transpose());
  Eigen::VectorXd q = tanh_of(p.wq * g + p.bq);
  Eigen::VectorXd attn = softmax(states_.transpose() * q / std::sqrt(static_cast<double>(d)));
  Eigen::VectorXd o = tanh_of(p.wc * stack(q, states_ * attn) + p.bc);
  return p.wo * o + p.bo;
}

namespace {

constexpr char kMagic[8] = {'D', 'T', 'X', 'R', 'E', 'F', '0', '1'};

}  // namespace

void ReferenceModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::int64_t dims[3] = {static_cast<std::int64_t>(vocab_size()),
                                static_cast<std::int64_t>(hidden()),
                                static_cast<std::int64_t>(max_positions())};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  Params copy = params_;
  for (auto& view : copy.views()) {
    out.write(reinterpret_cast<const char*>(view.data()),
              static_cast<std::streamsize>(view.size() * sizeof(double)));
  }
  if (!out) throw Error("write failed: " + path.string());
}

ReferenceModel ReferenceModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(path.string() + ": not a reference model weights file");
  }
  std::int64_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) throw Error(path.string() + ": bad header");
  ReferenceModel model(static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                       static_cast<std::size_t>(dims[2]), 0);
  for (auto& view : model.params_.views()) {
    in.read(reinterpret_cast<char*>(view.data()),
            static_cast<std::streamsize>(view.size() * sizeof(double)));
  }
  if (!in) throw Error(path.string() + ": truncated weights");
  return model;
}

void AdamOptimizer::step(ReferenceModel::Params& params, ReferenceModel::Params& grads) {
  if (!initialized_) {
    m_.set_zero_like(params);
    v_.set_zero_like(params);
    initialized_ = true;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.views();
  auto g = grads.views();
  auto m = m_.views();
  auto v = v_.views();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (m[i].size() != p[i].size()) throw Error("optimizer state does not match parameter shapes");
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i].cwiseProduct(g[i]);
    p[i].array() -= lr_ * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace detox
