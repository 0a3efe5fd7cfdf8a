#include "wignerpose/specconv.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "wignerpose/errors.hpp"
#include "wignerpose/io.hpp"

namespace wignerpose {

std::vector<RotationMatrix<double>> local_taps(int count, double support_angle) {
  if (count < 1) throw std::domain_error("local_taps: count must be >= 1");
  std::vector<RotationMatrix<double>> out{RotationMatrix<double>::Identity()};
  if (count == 1) return out;
  const double frac = (support_angle - std::sin(support_angle)) / std::numbers::pi;
  auto n = static_cast<std::size_t>(std::ceil((count - 1) / frac));
  for (;;) {
    const SO3Grid g = so3_super_fibonacci(n);
    std::vector<RotationMatrix<double>> inside;
    for (const auto& r : g.rotations)
      if (geodesic_distance<double>(r, RotationMatrix<double>::Identity()) <= support_angle) inside.push_back(r);
    if (static_cast<int>(inside.size()) >= count - 1) {
      out.insert(out.end(), inside.begin(), inside.begin() + (count - 1));
      return out;
    }
    n += n / 50 + 1;
  }
}

LocalSO3Filter make_local_filter(int L, int in, int out, int taps, double support_angle) {
  LocalSO3Filter f;
  f.bandlimit = L;
  f.in_channels = in;
  f.out_channels = out;
  f.support_angle = support_angle;
  f.taps = local_taps(taps, support_angle);
  f.tap_psi = psi_table(f.taps, L);
  f.weights = Eigen::MatrixXd::Zero(in * out, taps);
  return f;
}

SO3Coeffs s2_conv(const RealCoeffs& c, const S2FilterBank& f) {
  if (c.bandlimit != f.bandlimit) throw ShapeError("s2_conv: band limits differ");
  if (c.channels() != f.in_channels) throw ShapeError("s2_conv: channel count differs from filter bank");
  const int L = c.bandlimit;
  SO3Coeffs x(L, f.out_channels);
  for (int o = 0; o < f.out_channels; ++o) {
    for (int l = 0; l <= L; ++l) {
      const int n = 2 * l + 1;
      BlockMap b = x.block(o, l);
      for (int i = 0; i < f.in_channels; ++i) {
        b.noalias() += c.data.row(i).segment(l * l, n).transpose() *
                       f.spectra.row(o * f.in_channels + i).segment(l * l, n);
      }
    }
  }
  return x;
}

SO3Coeffs so3_conv(const SO3Coeffs& x, const RowMajorMatrixXd& k, int out_channels) {
  const int L = x.bandlimit;
  const int in = x.channels();
  if (k.rows() != static_cast<Eigen::Index>(in) * out_channels || k.cols() != psi_dim(L))
    throw ShapeError("so3_conv: filter blocks do not match input");
  SO3Coeffs out(L, out_channels);
  for (int j = 0; j < out_channels; ++j) {
    for (int o = 0; o < in; ++o) {
      for (int l = 0; l <= L; ++l) {
        const int n = 2 * l + 1;
        const ConstBlockMap kb(k.row(j * in + o).data() + psi_offset(l), n, n);
        out.block(j, l).noalias() += x.block(o, l) * kb.transpose();
      }
    }
  }
  return out;
}

SO3Coeffs so3_conv(const SO3Coeffs& x, const LocalSO3Filter& f) {
  if (x.bandlimit != f.bandlimit) throw ShapeError("so3_conv: band limits differ");
  if (x.channels() != f.in_channels) throw ShapeError("so3_conv: channel count differs from filter");
  return so3_conv(x, f.spectral(), f.out_channels);
}

SO3Coeffs left_translate(const SO3Coeffs& x, const RotationMatrix<double>& r) {
  const EulerZYZ<double> e = matrix_to_euler(r);
  SO3Coeffs out(x.bandlimit, x.channels());
  for (int l = 0; l <= x.bandlimit; ++l) {
    const Eigen::MatrixXd d = wigner_D_real(l, e);
    for (int c = 0; c < x.channels(); ++c) out.block(c, l).noalias() = d * x.block(c, l);
  }
  return out;
}

SO3Sampler::SO3Sampler(const SO3Grid& grid, int L) : bandlimit_(L) {
  if (grid.psi_table && grid.psi_bandlimit == L) {
    table_ = *grid.psi_table;
  } else {
    table_ = psi_table(grid.angles, L);
  }
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(table_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (table_.rows() < table_.cols() || cond > kMaxCondition)
    throw IllConditionedError("SO3Sampler: grid too coarse for band limit " + std::to_string(L));
  Eigen::VectorXd shrink(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) shrink(i) = sv(i) / (sv(i) * sv(i) + kRidge);
  pinv_ = svd.matrixV() * shrink.asDiagonal() * svd.matrixU().transpose();
}

SO3Coeffs SO3Sampler::analyze(const Eigen::MatrixXd& values) const {
  if (values.cols() != table_.rows()) throw ShapeError("SO3Sampler: value count differs from grid size");
  return SO3Coeffs(bandlimit_, values * pinv_.transpose());
}

SO3Coeffs so3_nonlinearity(const SO3Coeffs& x, const SO3Sampler& sampler) {
  if (x.bandlimit != sampler.bandlimit()) throw ShapeError("so3_nonlinearity: band limits differ");
  return sampler.analyze(sampler.sample(x).cwiseMax(0.0));
}

std::string to_string(HeadKind h) {
  switch (h) {
    case HeadKind::wigner: return "wigner";
    case HeadKind::euler: return "euler";
    case HeadKind::quaternion: return "quaternion";
    case HeadKind::axis_angle: return "axis_angle";
    case HeadKind::rotmat: return "rotmat";
  }
  return "unknown";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "wigner") return HeadKind::wigner;
  if (s == "euler") return HeadKind::euler;
  if (s == "quaternion") return HeadKind::quaternion;
  if (s == "axis_angle") return HeadKind::axis_angle;
  if (s == "rotmat") return HeadKind::rotmat;
  throw std::invalid_argument("unknown head kind: " + s);
}

int head_dim(HeadKind h, int L) {
  switch (h) {
    case HeadKind::wigner: return psi_dim(L);
    case HeadKind::euler: return 3;
    case HeadKind::quaternion: return 4;
    case HeadKind::axis_angle: return 4;
    case HeadKind::rotmat: return 9;
  }
  return 0;
}

Eigen::Index ToyModel::parameter_count() const {
  return mixer.size() + s2_filters.spectra.size() + so3_filter.weights.size() + head.size();
}

Eigen::VectorXd ToyModel::parameters() const {
  Eigen::VectorXd p(parameter_count());
  Eigen::Index o = 0;
  for (const Eigen::MatrixXd* m : {&mixer, &s2_filters.spectra, &so3_filter.weights, &head}) {
    p.segment(o, m->size()) = m->reshaped();
    o += m->size();
  }
  return p;
}

void ToyModel::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != parameter_count()) throw ShapeError("set_parameters: length mismatch");
  Eigen::Index o = 0;
  for (Eigen::MatrixXd* m : {&mixer, &s2_filters.spectra, &so3_filter.weights, &head}) {
    m->reshaped() = p.segment(o, m->size());
    o += m->size();
  }
}

Eigen::VectorXd ModelGrad::flat() const {
  Eigen::VectorXd p(mixer.size() + s2.size() + taps.size() + head.size());
  Eigen::Index o = 0;
  for (const Eigen::MatrixXd* m : {&mixer, &s2, &taps, &head}) {
    p.segment(o, m->size()) = m->reshaped();
    o += m->size();
  }
  return p;
}

ToyModel make_model(const ModelConfig& cfg, std::uint64_t seed) {
  ToyModel m;
  m.cfg = cfg;
  const int L = cfg.bandlimit;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  auto fill = [&](Eigen::MatrixXd& a, double scale) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = scale * n01(rng);
  };
  m.mixer.resize(cfg.mid_channels, cfg.in_channels);
  fill(m.mixer, 1.0 / std::sqrt(cfg.in_channels));
  m.s2_filters = S2FilterBank(L, cfg.mid_channels, cfg.hidden_channels);
  fill(m.s2_filters.spectra, 1.0 / std::sqrt(cfg.mid_channels));
  m.so3_filter = make_local_filter(L, cfg.hidden_channels, 1, cfg.taps, cfg.support_angle);
  if (cfg.head == HeadKind::wigner) {
    fill(m.so3_filter.weights, 1.0 / std::sqrt(cfg.hidden_channels * cfg.taps));
    m.head.resize(0, 0);
  } else {
    m.so3_filter.weights.setZero();
    m.head.resize(head_dim(cfg.head, L), cfg.hidden_channels * psi_dim(L));
    fill(m.head, 1.0 / std::sqrt(static_cast<double>(m.head.cols())));
  }
  return m;
}

Eigen::VectorXd forward(const ToyModel& m, const SO3Sampler& sampler, const RealCoeffs& raw, ForwardCache* cache) {
  const int L = m.cfg.bandlimit;
  if (raw.bandlimit != L || raw.channels() != m.cfg.in_channels) throw ShapeError("forward: input shape mismatch");
  if (sampler.bandlimit() != L) throw ShapeError("forward: sampler band limit mismatch");
  RealCoeffs mixed(L, m.mixer * raw.data);
  SO3Coeffs conv = s2_conv(mixed, m.s2_filters);
  Eigen::MatrixXd pre = sampler.sample(conv);
  SO3Coeffs act = sampler.analyze(pre.cwiseMax(0.0));
  Eigen::VectorXd out;
  if (m.cfg.head == HeadKind::wigner) {
    out = so3_conv(act, m.so3_filter).data.row(0).transpose();
  } else {
    out = m.head * act.data.reshaped<Eigen::RowMajor>();
  }
  if (cache) {
    cache->raw = raw;
    cache->mixed = std::move(mixed);
    cache->conv = std::move(conv);
    cache->pre = std::move(pre);
    cache->act = std::move(act);
    cache->output = out;
  }
  return out;
}

ModelGrad backward(const ToyModel& m, const SO3Sampler& sampler, const ForwardCache& cache,
                   const Eigen::VectorXd& d_output) {
  const int L = m.cfg.bandlimit;
  const int hidden = m.cfg.hidden_channels;
  const int mid = m.cfg.mid_channels;
  ModelGrad g;
  g.taps = Eigen::MatrixXd::Zero(m.so3_filter.weights.rows(), m.so3_filter.weights.cols());
  g.head = Eigen::MatrixXd::Zero(m.head.rows(), m.head.cols());

  SO3Coeffs d_act(L, hidden);
  if (m.cfg.head == HeadKind::wigner) {
    if (d_output.size() != psi_dim(L)) throw ShapeError("backward: output gradient length");
    const RowMajorMatrixXd k = m.so3_filter.spectral();
    RowMajorMatrixXd dk = RowMajorMatrixXd::Zero(k.rows(), k.cols());
    for (int o = 0; o < hidden; ++o) {
      for (int l = 0; l <= L; ++l) {
        const int n = 2 * l + 1;
        const ConstBlockMap dout(d_output.data() + psi_offset(l), n, n);
        const ConstBlockMap kb(k.row(o).data() + psi_offset(l), n, n);
        d_act.block(o, l).noalias() = dout * kb;
        BlockMap(dk.row(o).data() + psi_offset(l), n, n).noalias() = dout.transpose() * cache.act.block(o, l);
      }
    }
    g.taps = dk * m.so3_filter.tap_psi.transpose();
  } else {
    g.head = d_output * cache.act.data.reshaped<Eigen::RowMajor>().transpose();
    d_act.data.reshaped<Eigen::RowMajor>() = m.head.transpose() * d_output;
  }

  const Eigen::MatrixXd d_pre =
      (d_act.data * sampler.pseudo_inverse()).cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
  const RowMajorMatrixXd d_conv = d_pre * sampler.table();

  Eigen::MatrixXd d_mixed = Eigen::MatrixXd::Zero(mid, num_coeffs(L));
  g.s2 = Eigen::MatrixXd::Zero(m.s2_filters.spectra.rows(), m.s2_filters.spectra.cols());
  for (int o = 0; o < hidden; ++o) {
    for (int l = 0; l <= L; ++l) {
      const int n = 2 * l + 1;
      const ConstBlockMap dx(d_conv.row(o).data() + psi_offset(l), n, n);
      for (int i = 0; i < mid; ++i) {
        const Eigen::Index row = o * mid + i;
        d_mixed.row(i).segment(l * l, n).noalias() +=
            (dx * m.s2_filters.spectra.row(row).segment(l * l, n).transpose()).transpose();
        g.s2.row(row).segment(l * l, n).noalias() +=
            (dx.transpose() * cache.mixed.data.row(i).segment(l * l, n).transpose()).transpose();
      }
    }
  }
  g.mixer = d_mixed * cache.raw.data.transpose();
  return g;
}

namespace {

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  io::write<std::int64_t>(os, m.rows());
  io::write<std::int64_t>(os, m.cols());
  io::write_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  const auto r = io::read<std::int64_t>(is);
  const auto c = io::read<std::int64_t>(is);
  if (r != rows || c != cols) throw FormatError("WDCK: tensor shape does not match config");
  Eigen::MatrixXd m(r, c);
  io::read_doubles(is, m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

}  // namespace

void save_checkpoint(const ToyModel& m, std::ostream& os) {
  io::write_header(os, "WDCK", kCheckpointVersion);
  io::write<std::uint32_t>(os, kPsiLayoutVersion);
  const ModelConfig& c = m.cfg;
  for (int v : {c.bandlimit, c.in_channels, c.mid_channels, c.hidden_channels, c.nonlin_level, c.taps,
                static_cast<int>(c.head)})
    io::write<std::int32_t>(os, v);
  io::write<double>(os, c.support_angle);
  write_matrix(os, m.mixer);
  write_matrix(os, m.s2_filters.spectra);
  write_matrix(os, m.so3_filter.weights);
  write_matrix(os, m.head);
  if (!os) throw std::runtime_error("save_checkpoint: write failed");
}

ToyModel load_checkpoint(std::istream& is) {
  io::expect_header(is, "WDCK", kCheckpointVersion);
  if (io::read<std::uint32_t>(is) != kPsiLayoutVersion) throw FormatError("WDCK: harmonic layout version mismatch");
  ModelConfig c;
  c.bandlimit = io::read<std::int32_t>(is);
  c.in_channels = io::read<std::int32_t>(is);
  c.mid_channels = io::read<std::int32_t>(is);
  c.hidden_channels = io::read<std::int32_t>(is);
  c.nonlin_level = io::read<std::int32_t>(is);
  c.taps = io::read<std::int32_t>(is);
  const auto head = io::read<std::int32_t>(is);
  if (head < 0 || head > 4) throw FormatError("WDCK: unknown head kind");
  c.head = static_cast<HeadKind>(head);
  c.support_angle = io::read<double>(is);
  if (c.bandlimit < 0 || c.bandlimit > 20 || c.in_channels < 1 || c.mid_channels < 1 || c.hidden_channels < 1 ||
      c.taps < 1)
    throw FormatError("WDCK: config out of range");
  ToyModel m = make_model(c, 0);
  m.mixer = read_matrix(is, m.mixer.rows(), m.mixer.cols());
  m.s2_filters.spectra = read_matrix(is, m.s2_filters.spectra.rows(), m.s2_filters.spectra.cols());
  m.so3_filter.weights = read_matrix(is, m.so3_filter.weights.rows(), m.so3_filter.weights.cols());
  m.head = read_matrix(is, m.head.rows(), m.head.cols());
  return m;
}

void save_checkpoint(const ToyModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  save_checkpoint(m, os);
}

ToyModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace wignerpose
