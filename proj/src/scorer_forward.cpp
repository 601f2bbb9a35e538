#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "varscore/errors.hpp"
#include "varscore/scorer.hpp"

namespace varscore {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNormEps = 1e-8;  // inside sqrt of vector-channel norms
constexpr double kLnEps = 1e-5;

int element_class(const std::string& element) {
  if (element == "C") return 0;
  if (element == "N") return 1;
  if (element == "O") return 2;
  if (element == "S") return 3;
  if (element == "P") return 4;
  return 5;
}

MatrixXd silu(const MatrixXd& x) {
  return (x.array() / (1.0 + (-x.array()).exp())).matrix();
}

MatrixXd silu_grad(const MatrixXd& x) {
  auto s = 1.0 / (1.0 + (-x.array()).exp());
  return (s * (1.0 + x.array() * (1.0 - s))).matrix();
}

MatrixXd sigmoid(const MatrixXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

// Each row repeated three times: lifts per-channel scalars onto vector rows.
MatrixXd rep3(const MatrixXd& a) {
  MatrixXd r(3 * a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) r.middleRows(3 * i, 3) = a.row(i).replicate(3, 1);
  return r;
}

MatrixXd sum3(const MatrixXd& a) {
  MatrixXd r(a.rows() / 3, a.cols());
  for (Index i = 0; i < r.rows(); ++i) r.row(i) = a.middleRows(3 * i, 3).colwise().sum();
  return r;
}

MatrixXd norms3(const MatrixXd& v) {
  return (sum3(v.cwiseProduct(v)).array() + kNormEps).sqrt().matrix();
}

struct UnitW {
  Eigen::Map<const MatrixXd> Wh, Ws, Wv, Wg;
  Eigen::Map<const VectorXd> bs, bg;
};

UnitW unit_w(const ScorerParams& p, const std::string& pre) {
  const auto& bsi = p.info(pre + ".bs");
  const auto& bgi = p.info(pre + ".bg");
  return {p.tensor(pre + ".Wh"),
          p.tensor(pre + ".Ws"),
          p.tensor(pre + ".Wv"),
          p.tensor(pre + ".Wg"),
          {p.flat().data() + bsi.offset, bsi.rows},
          {p.flat().data() + bgi.offset, bgi.rows}};
}

struct UnitG {
  Eigen::Map<MatrixXd> Wh, Ws, Wv, Wg;
  Eigen::Map<VectorXd> bs, bg;
};

UnitG unit_g(const ScorerParams& p, VectorXd& g, const std::string& pre) {
  auto m = [&](const char* s) {
    const auto& i = p.info(pre + s);
    return Eigen::Map<MatrixXd>(g.data() + i.offset, i.rows, i.cols);
  };
  const auto& bsi = p.info(pre + ".bs");
  const auto& bgi = p.info(pre + ".bg");
  return {m(".Wh"), m(".Ws"), m(".Wv"), m(".Wg"),
          {g.data() + bsi.offset, bsi.rows},
          {g.data() + bgi.offset, bgi.rows}};
}

struct GvpTape {
  MatrixXd Sin, Vin;   // unit inputs
  MatrixXd Vh, norms;  // vector hidden state and its channel norms
  MatrixXd Slin, Sout;
  MatrixXd gate, Vmu, Vout;
};

void gvp_forward(const UnitW& w, MatrixXd Sin, MatrixXd Vin, GvpTape& t) {
  t.Sin = std::move(Sin);
  t.Vin = std::move(Vin);
  t.Vh = t.Vin * w.Wh.transpose();
  t.norms = norms3(t.Vh);
  MatrixXd scat(t.Sin.rows(), t.Sin.cols() + t.norms.cols());
  scat << t.Sin, t.norms;
  t.Slin = (scat * w.Ws.transpose()).rowwise() + w.bs.transpose();
  t.Sout = silu(t.Slin);
  t.gate = sigmoid(((t.Sout * w.Wg.transpose()).rowwise() + w.bg.transpose()).eval());
  t.Vmu = t.Vh * w.Wv.transpose();
  t.Vout = t.Vmu.cwiseProduct(rep3(t.gate));
}

// Adds input gradients into dSin/dVin (sized by caller) and accumulates
// parameter gradients.
void gvp_backward(const UnitW& w, UnitG& g, const GvpTape& t, const MatrixXd& dSout,
                  const MatrixXd& dVout, MatrixXd& dSin, MatrixXd& dVin) {
  MatrixXd dgate = sum3(dVout.cwiseProduct(t.Vmu));
  MatrixXd dVmu = dVout.cwiseProduct(rep3(t.gate));
  g.Wv += dVmu.transpose() * t.Vh;
  MatrixXd dVh = dVmu * w.Wv;

  MatrixXd dglin = dgate.cwiseProduct(t.gate.cwiseProduct((1.0 - t.gate.array()).matrix()));
  g.Wg += dglin.transpose() * t.Sout;
  g.bg += dglin.colwise().sum().transpose();

  MatrixXd dSact = dSout + dglin * w.Wg;
  MatrixXd dSlin = dSact.cwiseProduct(silu_grad(t.Slin));
  MatrixXd scat(t.Sin.rows(), t.Sin.cols() + t.norms.cols());
  scat << t.Sin, t.norms;
  g.Ws += dSlin.transpose() * scat;
  g.bs += dSlin.colwise().sum().transpose();
  MatrixXd dScat = dSlin * w.Ws;

  dSin += dScat.leftCols(t.Sin.cols());
  MatrixXd dnorms = dScat.rightCols(t.norms.cols());
  dVh += rep3(dnorms.cwiseQuotient(t.norms)).cwiseProduct(t.Vh);

  g.Wh += dVh.transpose() * t.Vin;
  dVin += dVh * w.Wh;
}

// Row-wise standardization, no learned affine part.
void layer_norm(const MatrixXd& x, MatrixXd& y, VectorXd& inv) {
  const auto cols = static_cast<double>(x.cols());
  VectorXd mean = x.rowwise().mean();
  MatrixXd centered = x.colwise() - mean;
  VectorXd var = centered.cwiseProduct(centered).rowwise().sum() / cols;
  inv = (var.array() + kLnEps).rsqrt();
  y = (centered.array().colwise() * inv.array()).matrix();
}

MatrixXd layer_norm_backward(const MatrixXd& y, const VectorXd& inv, const MatrixXd& dy) {
  VectorXd mean_dy = dy.rowwise().mean();
  VectorXd mean_dyy = dy.cwiseProduct(y).rowwise().mean();
  MatrixXd dx = dy;
  dx.colwise() -= mean_dy;
  dx -= (y.array().colwise() * mean_dyy.array()).matrix();
  return (dx.array().colwise() * inv.array()).matrix();
}

// Per-node root-mean-square over vector channels; keeps directions intact.
void vector_norm(const MatrixXd& v, MatrixXd& y, VectorXd& rms) {
  const Index nodes = v.rows() / 3;
  const auto chans = static_cast<double>(v.cols());
  rms.resize(nodes);
  y.resize(v.rows(), v.cols());
  for (Index i = 0; i < nodes; ++i) {
    auto block = v.middleRows(3 * i, 3);
    rms[i] = std::sqrt(block.squaredNorm() / chans + kNormEps);
    y.middleRows(3 * i, 3) = block / rms[i];
  }
}

MatrixXd vector_norm_backward(const MatrixXd& y, const VectorXd& rms, const MatrixXd& dy) {
  const Index nodes = y.rows() / 3;
  const auto chans = static_cast<double>(y.cols());
  MatrixXd dv(y.rows(), y.cols());
  for (Index i = 0; i < nodes; ++i) {
    auto yb = y.middleRows(3 * i, 3);
    auto dyb = dy.middleRows(3 * i, 3);
    double coupling = dyb.cwiseProduct(yb).sum() / chans;
    dv.middleRows(3 * i, 3) = (dyb - yb * coupling) / rms[i];
  }
  return dv;
}

MatrixXd masked(const MatrixXd& x, const MatrixXd& mask) {
  return mask.size() == 0 ? x : x.cwiseProduct(mask);
}

MatrixXd masked3(const MatrixXd& x, const MatrixXd& mask) {
  return mask.size() == 0 ? x : x.cwiseProduct(rep3(mask));
}

struct LayerTape {
  GvpTape msg;   // Sin = [S_src | edge rbf], Vin = [V_src | edge unit vec]
  VectorXd deg;  // incoming-edge count per node
  MatrixXd mask_s, mask_v, fmask_s, fmask_v;
  MatrixXd S_ln1, V_ln1;
  VectorXd inv1, rms1;
  GvpTape ff;
  MatrixXd S_ln2, V_ln2;
  VectorXd inv2, rms2;
};

}  // namespace

struct ForwardTrace {
  std::vector<LayerTape> layers;
  MatrixXd U;             // target-node final scalars, one row per graph
  MatrixXd Fpre, F;       // output projection pre/post activation
  MatrixXd H1pre, H1, hmask;
  MatrixXd logits;
};

namespace {

MatrixXd dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd m(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = u(rng) < rate ? 0.0 : keep;
  return m;
}

void run_layer(const ScorerParams& params, const BatchedGraphs& in, int layer, MatrixXd& S,
               MatrixXd& V, double rate, std::mt19937_64* rng, LayerTape& t) {
  const auto& spec = params.spec();
  const int n = spec.node_scalar_dim;
  const int nu = spec.node_vector_dim;
  const auto E = static_cast<Index>(in.edge_src.size());
  const Index N = S.rows();
  const std::string prefix = "layer" + std::to_string(layer);

  MatrixXd Se(E, n + spec.edge_scalar_dim);
  MatrixXd Ve(3 * E, nu + spec.edge_vector_dim);
  for (Index e = 0; e < E; ++e) {
    const int s = in.edge_src[static_cast<std::size_t>(e)];
    Se.row(e).head(n) = S.row(s);
    Se.row(e).tail(spec.edge_scalar_dim) = in.edge_scalar.row(e);
    Ve.middleRows(3 * e, 3).leftCols(nu) = V.middleRows(3 * s, 3);
    Ve.middleRows(3 * e, 3).rightCols(spec.edge_vector_dim) = in.edge_vector.middleRows(3 * e, 3);
  }

  gvp_forward(unit_w(params, prefix + ".msg"), std::move(Se), std::move(Ve), t.msg);

  t.deg = VectorXd::Zero(N);
  MatrixXd Ms = MatrixXd::Zero(N, n);
  MatrixXd Mv = MatrixXd::Zero(3 * N, nu);
  for (Index e = 0; e < E; ++e) {
    const int d = in.edge_dst[static_cast<std::size_t>(e)];
    Ms.row(d) += t.msg.Sout.row(e);
    Mv.middleRows(3 * d, 3) += t.msg.Vout.middleRows(3 * e, 3);
    t.deg[d] += 1.0;
  }
  for (Index i = 0; i < N; ++i) {
    if (t.deg[i] > 0.0) {
      Ms.row(i) /= t.deg[i];
      Mv.middleRows(3 * i, 3) /= t.deg[i];
    }
  }

  if (rng) {
    t.mask_s = dropout_mask(N, n, rate, *rng);
    t.mask_v = dropout_mask(N, nu, rate, *rng);
    t.fmask_s = dropout_mask(N, n, rate, *rng);
    t.fmask_v = dropout_mask(N, nu, rate, *rng);
  }

  layer_norm(S + masked(Ms, t.mask_s), t.S_ln1, t.inv1);
  vector_norm(V + masked3(Mv, t.mask_v), t.V_ln1, t.rms1);

  gvp_forward(unit_w(params, prefix + ".ff"), t.S_ln1, t.V_ln1, t.ff);

  layer_norm(t.S_ln1 + masked(t.ff.Sout, t.fmask_s), t.S_ln2, t.inv2);
  vector_norm(t.V_ln1 + masked3(t.ff.Vout, t.fmask_v), t.V_ln2, t.rms2);

  S = t.S_ln2;
  V = t.V_ln2;
}

void backward_layer(const ScorerParams& params, const BatchedGraphs& in, int layer,
                    const LayerTape& t, VectorXd& grad, MatrixXd& dS, MatrixXd& dV) {
  const auto& spec = params.spec();
  const int n = spec.node_scalar_dim;
  const int nu = spec.node_vector_dim;
  const auto E = static_cast<Index>(in.edge_src.size());
  const std::string prefix = "layer" + std::to_string(layer);

  MatrixXd dS_res2 = layer_norm_backward(t.S_ln2, t.inv2, dS);
  MatrixXd dV_res2 = vector_norm_backward(t.V_ln2, t.rms2, dV);

  MatrixXd dS_ln1 = dS_res2;
  MatrixXd dV_ln1 = dV_res2;
  auto gf = unit_g(params, grad, prefix + ".ff");
  gvp_backward(unit_w(params, prefix + ".ff"), gf, t.ff, masked(dS_res2, t.fmask_s),
               masked3(dV_res2, t.fmask_v), dS_ln1, dV_ln1);

  MatrixXd dS_res1 = layer_norm_backward(t.S_ln1, t.inv1, dS_ln1);
  MatrixXd dV_res1 = vector_norm_backward(t.V_ln1, t.rms1, dV_ln1);

  MatrixXd dMs = masked(dS_res1, t.mask_s);
  MatrixXd dMv = masked3(dV_res1, t.mask_v);
  MatrixXd dmsgS(E, n);
  MatrixXd dmsgV(3 * E, nu);
  for (Index e = 0; e < E; ++e) {
    const int d = in.edge_dst[static_cast<std::size_t>(e)];
    dmsgS.row(e) = dMs.row(d) / t.deg[d];
    dmsgV.middleRows(3 * e, 3) = dMv.middleRows(3 * d, 3) / t.deg[d];
  }

  MatrixXd dSe = MatrixXd::Zero(E, n + spec.edge_scalar_dim);
  MatrixXd dVe = MatrixXd::Zero(3 * E, nu + spec.edge_vector_dim);
  auto gm = unit_g(params, grad, prefix + ".msg");
  gvp_backward(unit_w(params, prefix + ".msg"), gm, t.msg, dmsgS, dmsgV, dSe, dVe);

  dS = dS_res1;
  dV = dV_res1;
  for (Index e = 0; e < E; ++e) {
    const int s = in.edge_src[static_cast<std::size_t>(e)];
    dS.row(s) += dSe.row(e).head(n);
    dV.middleRows(3 * s, 3) += dVe.middleRows(3 * e, 3).leftCols(nu);
  }
}

MatrixXd forward_impl(const ScorerParams& params, const BatchedGraphs& in,
                      const DropoutSpec& dropout, ForwardTrace* trace) {
  const auto& spec = params.spec();
  if (in.num_nodes <= 0 || in.num_graphs <= 0) {
    throw ValidationError("forward requires a non-empty batch");
  }
  if (in.node_scalar.cols() != spec.node_scalar_dim ||
      in.edge_scalar.cols() != spec.edge_scalar_dim ||
      in.edge_vector.cols() != spec.edge_vector_dim) {
    throw ConfigError("featurized input does not match the parameter dimensions");
  }

  std::mt19937_64 rng;
  std::mt19937_64* rng_ptr = nullptr;
  if (dropout.rate > 0.0) {
    rng.seed(dropout.seed);
    rng_ptr = &rng;
  }

  MatrixXd S = in.node_scalar;
  MatrixXd V = MatrixXd::Zero(3 * in.num_nodes, spec.node_vector_dim);

  LayerTape scratch;
  if (trace) trace->layers.resize(static_cast<std::size_t>(spec.num_layers));
  for (int k = 0; k < spec.num_layers; ++k) {
    LayerTape& t = trace ? trace->layers[static_cast<std::size_t>(k)] : scratch;
    run_layer(params, in, k, S, V, dropout.rate, rng_ptr, t);
  }

  const auto G = static_cast<Index>(in.target.size());
  MatrixXd U(G, spec.node_scalar_dim);
  for (Index g = 0; g < G; ++g) U.row(g) = S.row(in.target[static_cast<std::size_t>(g)]);

  MatrixXd Fpre = (U * params.tensor("out.W").transpose()).rowwise() +
                  params.tensor("out.b").col(0).transpose();
  MatrixXd F = silu(Fpre);
  MatrixXd H1pre = (F * params.tensor("head.W1").transpose()).rowwise() +
                   params.tensor("head.b1").col(0).transpose();
  MatrixXd H1 = silu(H1pre);
  MatrixXd hmask;
  if (rng_ptr) hmask = dropout_mask(G, spec.hidden_out_dim, dropout.rate, *rng_ptr);
  MatrixXd logits = (masked(H1, hmask) * params.tensor("head.W2").transpose()).rowwise() +
                    params.tensor("head.b2").col(0).transpose();

  if (trace) {
    trace->U = std::move(U);
    trace->Fpre = std::move(Fpre);
    trace->F = std::move(F);
    trace->H1pre = std::move(H1pre);
    trace->H1 = std::move(H1);
    trace->hmask = std::move(hmask);
    trace->logits = logits;
  }
  return logits;
}

void backward_impl(const ScorerParams& params, const BatchedGraphs& in, const ForwardTrace& t,
                   const MatrixXd& dlogits, VectorXd& grad) {
  const auto& spec = params.spec();
  const auto N = static_cast<Index>(in.num_nodes);

  MatrixXd H1d = masked(t.H1, t.hmask);
  {
    const auto& i2 = params.info("head.W2");
    Eigen::Map<MatrixXd>(grad.data() + i2.offset, i2.rows, i2.cols) +=
        dlogits.transpose() * H1d;
    const auto& ib2 = params.info("head.b2");
    Eigen::Map<VectorXd>(grad.data() + ib2.offset, ib2.rows) +=
        dlogits.colwise().sum().transpose();
  }
  MatrixXd dH1 = masked(dlogits * params.tensor("head.W2"), t.hmask);
  MatrixXd dH1pre = dH1.cwiseProduct(silu_grad(t.H1pre));
  {
    const auto& i1 = params.info("head.W1");
    Eigen::Map<MatrixXd>(grad.data() + i1.offset, i1.rows, i1.cols) +=
        dH1pre.transpose() * t.F;
    const auto& ib1 = params.info("head.b1");
    Eigen::Map<VectorXd>(grad.data() + ib1.offset, ib1.rows) +=
        dH1pre.colwise().sum().transpose();
  }
  MatrixXd dF = dH1pre * params.tensor("head.W1");
  MatrixXd dFpre = dF.cwiseProduct(silu_grad(t.Fpre));
  {
    const auto& io = params.info("out.W");
    Eigen::Map<MatrixXd>(grad.data() + io.offset, io.rows, io.cols) +=
        dFpre.transpose() * t.U;
    const auto& ib = params.info("out.b");
    Eigen::Map<VectorXd>(grad.data() + ib.offset, ib.rows) +=
        dFpre.colwise().sum().transpose();
  }
  MatrixXd dU = dFpre * params.tensor("out.W");

  MatrixXd dS = MatrixXd::Zero(N, spec.node_scalar_dim);
  MatrixXd dV = MatrixXd::Zero(3 * N, spec.node_vector_dim);
  for (Index g = 0; g < dU.rows(); ++g) {
    dS.row(in.target[static_cast<std::size_t>(g)]) += dU.row(g);
  }
  for (int k = spec.num_layers - 1; k >= 0; --k) {
    backward_layer(params, in, k, t.layers[static_cast<std::size_t>(k)], grad, dS, dV);
  }
}

}  // namespace

Eigen::VectorXd radial_basis(double distance, int count, double cutoff) {
  if (count <= 0 || !(cutoff > 0.0)) throw ConfigError("invalid radial-basis parameters");
  const double spacing = count > 1 ? cutoff / (count - 1) : cutoff;
  VectorXd out(count);
  for (int k = 0; k < count; ++k) {
    const double center = count > 1 ? spacing * k : 0.5 * cutoff;
    const double z = (distance - center) / spacing;
    out[k] = std::exp(-0.5 * z * z);
  }
  return out;
}

BatchedGraphs featurize_batch(const std::vector<const MaskedGraph*>& batch,
                              const FeatureSpec& spec) {
  spec.validate();
  if (batch.empty()) throw ValidationError("cannot featurize an empty batch");

  Index total_nodes = 0, total_edges = 0;
  for (const auto* m : batch) {
    if (!m || m->graph.atoms.empty()) throw EmptyStructureError("empty masked graph in batch");
    total_nodes += static_cast<Index>(m->graph.atoms.size());
    total_edges += static_cast<Index>(m->graph.edges.size());
  }

  BatchedGraphs out;
  out.num_graphs = static_cast<int>(batch.size());
  out.num_nodes = static_cast<int>(total_nodes);
  out.node_scalar = MatrixXd::Zero(total_nodes, spec.node_scalar_dim);
  out.edge_scalar.resize(total_edges, spec.edge_scalar_dim);
  out.edge_vector = MatrixXd::Zero(3 * total_edges, spec.edge_vector_dim);
  out.edge_src.reserve(static_cast<std::size_t>(total_edges));
  out.edge_dst.reserve(static_cast<std::size_t>(total_edges));

  Index node_off = 0, edge_off = 0;
  for (const auto* m : batch) {
    const auto& g = m->graph;
    for (std::size_t i = 0; i < g.atoms.size(); ++i) {
      const Index row = node_off + static_cast<Index>(i);
      out.node_scalar(row, element_class(g.atoms[i].element)) = 1.0;
      if (g.atoms[i].is_backbone()) out.node_scalar(row, 6) = 1.0;
    }
    out.node_scalar(node_off + m->target_atom, 7) = 1.0;
    out.target.push_back(static_cast<int>(node_off + m->target_atom));
    out.label.push_back(m->true_label.index());

    for (const auto& e : g.edges) {
      out.edge_src.push_back(static_cast<int>(node_off + e.src));
      out.edge_dst.push_back(static_cast<int>(node_off + e.dst));
      out.edge_scalar.row(edge_off) =
          radial_basis(e.distance, spec.edge_scalar_dim, spec.cutoff).transpose();
      Eigen::Vector3d disp = g.atoms[static_cast<std::size_t>(e.src)].coords -
                             g.atoms[static_cast<std::size_t>(e.dst)].coords;
      const double d = disp.norm();
      if (d > 1e-12) {
        for (int c = 0; c < spec.edge_vector_dim; ++c) {
          out.edge_vector.block<3, 1>(3 * edge_off, c) = disp / d;
        }
      }
      ++edge_off;
    }
    node_off += static_cast<Index>(g.atoms.size());
  }
  return out;
}

BatchedGraphs featurize(const MaskedGraph& masked, const FeatureSpec& spec) {
  return featurize_batch({&masked}, spec);
}

Eigen::MatrixXd forward_batch(const ScorerParams& params, const BatchedGraphs& input,
                              const DropoutSpec& dropout, ForwardTrace* trace) {
  return forward_impl(params, input, dropout, trace);
}

ScoreVector forward(const ScorerParams& params, const MaskedGraph& masked) {
  BatchedGraphs in = featurize(masked, params.spec());
  MatrixXd logits = forward_impl(params, in, {}, nullptr);
  ScoreVector v;
  v.scores = logits.row(0).transpose();
  return v;
}

std::vector<Eigen::MatrixXd> forward_vector_states(const ScorerParams& params,
                                                   const BatchedGraphs& input) {
  ForwardTrace trace;
  forward_impl(params, input, {}, &trace);
  std::vector<MatrixXd> states;
  states.reserve(trace.layers.size());
  for (const auto& t : trace.layers) states.push_back(t.V_ln2);
  return states;
}

double loss_and_grad(const ScorerParams& params, const BatchedGraphs& input,
                     Eigen::VectorXd& grad, const DropoutSpec& dropout) {
  if (input.target.empty()) throw ValidationError("loss requires at least one graph");
  if (input.label.size() != input.target.size()) {
    throw ValidationError("every graph in a training batch needs a label");
  }
  grad = VectorXd::Zero(params.size());

  ForwardTrace trace;
  MatrixXd logits = forward_impl(params, input, dropout, &trace);
  const auto G = logits.rows();

  double loss = 0.0;
  MatrixXd dlogits(G, AminoAcid::kCount);
  for (Index g = 0; g < G; ++g) {
    const int label = input.label[static_cast<std::size_t>(g)];
    Eigen::RowVectorXd row = logits.row(g);
    const double mx = row.maxCoeff();
    Eigen::RowVectorXd ex = (row.array() - mx).exp();
    const double z = ex.sum();
    loss += std::log(z) + mx - row[label];
    dlogits.row(g) = ex / z;
    dlogits(g, label) -= 1.0;
  }
  loss /= static_cast<double>(G);
  dlogits /= static_cast<double>(G);

  backward_impl(params, input, trace, dlogits, grad);
  return loss;
}

double loss_and_grad(const ScorerParams& params, const std::vector<const MaskedGraph*>& batch,
                     Eigen::VectorXd& grad, const DropoutSpec& dropout) {
  return loss_and_grad(params, featurize_batch(batch, params.spec()), grad, dropout);
}

}  // namespace varscore
