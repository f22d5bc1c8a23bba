#include "efvms/io.hpp"

#include <bit>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "efvms/errors.hpp"

namespace efvms {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string code_version() { return "0.1.0"; }

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Cylinder:
      return "cylinder";
    case ProblemKind::Cavity:
      return "cavity";
    case ProblemKind::Channel:
      return "channel";
  }
  return "unknown";
}

RomConfig RunConfig::rom_config() const {
  RomConfig r;
  r.nu = strategy.nu;
  r.dt = strategy.dt;
  r.delta = strategy.delta;
  r.delta1 = strategy.delta1;
  r.delta2 = strategy.delta2;
  r.gamma_d = strategy.gamma_d;
  r.r_bar_u = r_bar_u;
  r.r_u = r_u;
  return r;
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(d)) throw ConfigError(key + ": '" + v + "' is not a number");
  return d;
}

int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError(key + ": '" + v + "' is not an integer");
  return static_cast<int>(d);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::string fmt(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"problem.name",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "cylinder") c.problem = ProblemKind::Cylinder;
         else if (v == "cavity") c.problem = ProblemKind::Cavity;
         else if (v == "channel") c.problem = ProblemKind::Channel;
         else throw ConfigError(k + ": unknown problem '" + v + "'");
       }},
      {"problem.ramp_time", [](RunConfig& c, const std::string& k, const std::string& v) { c.ramp_time = parse_double(k, v); }},
      {"mesh.h", [](RunConfig& c, const std::string& k, const std::string& v) { c.mesh_h = parse_double(k, v); }},
      {"mesh.refinement",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.mesh_refinement = parse_double(k, v); }},
      {"mesh.file", [](RunConfig& c, const std::string&, const std::string& v) { c.mesh_file = v; }},
      {"physics.nu", [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.nu = parse_double(k, v); }},
      {"time.dt", [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.dt = parse_double(k, v); }},
      {"time.t_final",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.t_final = parse_double(k, v); }},
      {"strategy.name",
       [](RunConfig& c, const std::string&, const std::string& v) { c.strategy.strategy = strategy_from_string(v); }},
      {"strategy.delta",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.delta = parse_double(k, v); }},
      {"strategy.delta1",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.delta1 = parse_double(k, v); }},
      {"strategy.delta2",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.delta2 = parse_double(k, v); }},
      {"strategy.chi", [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.chi = parse_double(k, v); }},
      {"strategy.gamma_d",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.gamma_d = parse_double(k, v); }},
      {"strategy.gamma_p",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.gamma_p = parse_double(k, v); }},
      {"strategy.coarse",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "nested_p1") c.strategy.coarse = CoarseSpace::Kind::NestedP1;
         else if (v == "fine") c.strategy.coarse = CoarseSpace::Kind::Fine;
         else throw ConfigError(k + ": unknown coarse space '" + v + "'");
       }},
      {"newton.tol",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.evolve.newton_tol = parse_double(k, v); }},
      {"newton.max_iter",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.evolve.newton_max_iter = parse_int(k, v); }},
      {"smagorinsky.enabled",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.strategy.evolve.smagorinsky_enabled = parse_bool(k, v);
       }},
      {"smagorinsky.c_s",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.evolve.c_s = parse_double(k, v); }},
      {"snapshots.count",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.n_snapshots = parse_int(k, v); }},
      {"snapshots.stride",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.snapshot_stride = parse_int(k, v); }},
      {"rom.r_u", [](RunConfig& c, const std::string& k, const std::string& v) { c.r_u = parse_int(k, v); }},
      {"rom.r_s", [](RunConfig& c, const std::string& k, const std::string& v) { c.r_s = parse_int(k, v); }},
      {"rom.r_p", [](RunConfig& c, const std::string& k, const std::string& v) { c.r_p = parse_int(k, v); }},
      {"rom.r_bar_u", [](RunConfig& c, const std::string& k, const std::string& v) { c.r_bar_u = parse_int(k, v); }},
      {"rom.lift",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "stokes") c.lift = LiftKind::Stokes;
         else if (v == "first_snapshot") c.lift = LiftKind::FirstSnapshot;
         else throw ConfigError(k + ": unknown lift '" + v + "'");
       }},
      {"rom.strategy",
       [](RunConfig& c, const std::string&, const std::string& v) { c.rom_strategy = rom_strategy_from_string(v); }},
      {"diagnostics.u_ref", [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.u_ref = parse_double(k, v); }},
      {"diagnostics.l_ref", [](RunConfig& c, const std::string& k, const std::string& v) { c.strategy.l_ref = parse_double(k, v); }},
      {"output.dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = setters().find(full);
      if (it == setters().end()) throw ConfigError("unknown configuration key '" + full + "'");
      it->second(cfg, full, value.data());
    }
  }
  cfg.strategy.validate();
  if (cfg.r_u < 1 || cfg.r_s < 0 || cfg.r_p < 1) throw ConfigError("reduced ranks must be positive");
  if (cfg.r_bar_u < 0 || cfg.r_bar_u > cfg.r_u) throw ConfigError("rom.r_bar_u must lie in [0, rom.r_u]");
  if (!(cfg.mesh_h > 0.0) || !(cfg.mesh_refinement >= 1.0)) throw ConfigError("invalid mesh size or refinement");
  if (cfg.ramp_time < 0.0) throw ConfigError("ramp time must be non-negative");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open configuration " + path.string());
  return parse_config(is);
}

std::string format_config(const RunConfig& c) {
  const auto& s = c.strategy;
  std::ostringstream os;
  os << "[problem]\nname = " << to_string(c.problem) << "\nramp_time = " << fmt(c.ramp_time) << "\n\n";
  os << "[mesh]\nh = " << fmt(c.mesh_h) << "\nrefinement = " << fmt(c.mesh_refinement) << "\n";
  if (!c.mesh_file.empty()) os << "file = " << c.mesh_file << "\n";
  os << "\n[physics]\nnu = " << fmt(s.nu) << "\n\n";
  os << "[time]\ndt = " << fmt(s.dt) << "\nt_final = " << fmt(s.t_final) << "\n\n";
  os << "[strategy]\nname = " << to_string(s.strategy) << "\ndelta = " << fmt(s.delta) << "\ndelta1 = " << fmt(s.delta1)
     << "\ndelta2 = " << fmt(s.delta2) << "\nchi = " << fmt(s.chi) << "\ngamma_d = " << fmt(s.gamma_d)
     << "\ngamma_p = " << fmt(s.gamma_p) << "\ncoarse = " << (s.coarse == CoarseSpace::Kind::Fine ? "fine" : "nested_p1")
     << "\n\n";
  os << "[newton]\ntol = " << fmt(s.evolve.newton_tol) << "\nmax_iter = " << s.evolve.newton_max_iter << "\n\n";
  os << "[smagorinsky]\nenabled = " << (s.evolve.smagorinsky_enabled ? "true" : "false") << "\nc_s = " << fmt(s.evolve.c_s)
     << "\n\n";
  os << "[snapshots]\ncount = " << s.n_snapshots << "\nstride = " << s.snapshot_stride << "\n\n";
  os << "[rom]\nr_u = " << c.r_u << "\nr_s = " << c.r_s << "\nr_p = " << c.r_p << "\nr_bar_u = " << c.r_bar_u
     << "\nlift = " << (c.lift == LiftKind::Stokes ? "stokes" : "first_snapshot") << "\nstrategy = " << to_string(c.rom_strategy)
     << "\n\n";
  os << "[diagnostics]\nu_ref = " << fmt(s.u_ref) << "\nl_ref = " << fmt(s.l_ref) << "\n\n";
  os << "[output]\ndir = " << c.output_dir << "\n";
  return os.str();
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"problem", to_string(c.problem)},
          {"ramp_time", c.ramp_time},
          {"mesh_h", c.mesh_h},
          {"mesh_refinement", c.mesh_refinement},
          {"mesh_file", c.mesh_file},
          {"strategy", to_json(c.strategy)},
          {"r_u", c.r_u},
          {"r_s", c.r_s},
          {"r_p", c.r_p},
          {"r_bar_u", c.r_bar_u},
          {"lift", c.lift == LiftKind::Stokes ? "stokes" : "first_snapshot"},
          {"rom_strategy", to_string(c.rom_strategy)}};
}

std::shared_ptr<const Mesh> make_mesh(const RunConfig& cfg) {
  if (!cfg.mesh_file.empty()) return std::make_shared<const Mesh>(load_mesh(cfg.mesh_file));
  switch (cfg.problem) {
    case ProblemKind::Cylinder:
      return std::make_shared<const Mesh>(build_cylinder_channel_mesh(cfg.mesh_h, cfg.mesh_refinement));
    case ProblemKind::Cavity: {
      const int n = std::max(1, static_cast<int>(std::lround(1.0 / cfg.mesh_h)));
      RectangleTags tags;
      tags.top = BoundaryTag::Inlet;
      return std::make_shared<const Mesh>(build_rectangle_mesh(n, n, {0.0, 0.0, 1.0, 1.0}, tags));
    }
    case ProblemKind::Channel: {
      const CylinderChannelGeometry g;
      const int nx = std::max(1, static_cast<int>(std::lround(g.length / cfg.mesh_h)));
      const int ny = std::max(1, static_cast<int>(std::lround(g.height / cfg.mesh_h)));
      RectangleTags tags;
      tags.left = BoundaryTag::Inlet;
      tags.right = BoundaryTag::Outflow;
      return std::make_shared<const Mesh>(build_rectangle_mesh(nx, ny, {0.0, 0.0, g.length, g.height}, tags));
    }
  }
  throw ConfigError("unknown problem");
}

BoundaryData make_boundary_data(const RunConfig& cfg) {
  if (cfg.problem == ProblemKind::Cavity) return BoundaryData::cavity_lid();
  return BoundaryData::channel_parabola(CylinderChannelGeometry{}.height, 1.0, cfg.ramp_time);
}

Problem make_problem(const RunConfig& cfg, std::shared_ptr<const Mesh> mesh) {
  auto space = std::make_shared<const TaylorHoodSpace>(std::move(mesh));
  return Problem::at_rest(Operators::build(space), make_boundary_data(cfg));
}

// ---------------------------------------------------------------------------
// Binary files: 8-byte magic, uint32 version, then format-specific payload.

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr char kSnapshotMagic[8] = {'E', 'F', 'V', 'S', 'N', 'A', 'P', '\0'};
constexpr char kBasisMagic[8] = {'E', 'F', 'V', 'B', 'A', 'S', 'E', '\0'};
constexpr char kOperatorsMagic[8] = {'E', 'F', 'V', 'R', 'O', 'P', 'S', '\0'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : os_(path, std::ios::binary), path_(path) {
    if (!os_) throw Error("cannot write " + path.string());
  }
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof v);
  }
  void doubles(const double* p, std::size_t n) { bytes(p, n * sizeof(double)); }
  void vector(const Vector& v) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    doubles(v.data(), static_cast<std::size_t>(v.size()));
  }
  void matrix(const DenseMatrix& m) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    doubles(m.data(), static_cast<std::size_t>(m.size()));
  }
  void json(const nlohmann::json& j) {
    const std::string s = j.dump();
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void close() {
    os_.close();
    if (!os_) throw Error("write failed: " + path_.string());
  }

 private:
  std::ofstream os_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : is_(path, std::ios::binary), path_(path) {
    if (!is_) throw Error("cannot open " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw Error(path_.string() + ": unexpected end of file");
  }
  template <typename T>
  T pod() {
    T v{};
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t size(std::uint64_t limit = (1ull << 40)) {
    const auto n = pod<std::uint64_t>();
    if (n > limit) throw Error(path_.string() + ": implausible length " + std::to_string(n));
    return n;
  }
  Vector vector() {
    Vector v(static_cast<Eigen::Index>(size()));
    bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
    return v;
  }
  DenseMatrix matrix() {
    const auto r = size(), c = size();
    DenseMatrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }
  nlohmann::json json() {
    std::string s(size(1ull << 30), '\0');
    bytes(s.data(), s.size());
    try {
      return nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path_.string() + ": corrupt metadata: " + e.what());
    }
  }
  void header(const char (&magic)[8], const char* what) {
    char m[8];
    bytes(m, 8);
    if (std::memcmp(m, magic, 8) != 0) throw Error(path_.string() + " is not a " + what + " file (bad magic)");
    const auto v = pod<std::uint32_t>();
    if (v != kFormatVersion) {
      throw Error(path_.string() + ": unsupported " + std::string(what) + " format version " + std::to_string(v) +
                  " (expected " + std::to_string(kFormatVersion) + ")");
    }
  }

 private:
  std::ifstream is_;
  std::filesystem::path path_;
};

}  // namespace

void write_snapshots(const SnapshotSet& set, const std::filesystem::path& path) {
  set.check();
  std::uint64_t n_u = 0, n_p = 0;
  if (!set.snapshots.empty()) {
    n_u = static_cast<std::uint64_t>(set.snapshots.front().u.coeffs.size());
    n_p = static_cast<std::uint64_t>(set.snapshots.front().p.coeffs.size());
  }
  Writer w(path);
  w.bytes(kSnapshotMagic, 8);
  w.pod(kFormatVersion);
  w.pod(n_u);
  w.pod(n_p);
  w.json(set.provenance);
  w.pod<std::uint64_t>(set.snapshots.size());
  for (const auto& s : set.snapshots) {
    w.pod(s.t);
    w.doubles(s.u.coeffs.data(), n_u);
    w.doubles(s.p.coeffs.data(), n_p);
  }
  w.close();
}

namespace {

SnapshotHeader read_header(Reader& r) {
  SnapshotHeader h;
  r.header(kSnapshotMagic, "snapshot");
  h.version = kFormatVersion;
  h.n_u = r.size();
  h.n_p = r.size();
  h.provenance = r.json();
  h.count = r.size();
  return h;
}

}  // namespace

SnapshotHeader read_snapshot_header(const std::filesystem::path& path) {
  Reader r(path);
  return read_header(r);
}

SnapshotSet read_snapshots(const std::filesystem::path& path, const SpacePtr& space) {
  Reader r(path);
  const auto h = read_header(r);
  SnapshotSet set;
  set.provenance = h.provenance;
  if (h.count > 0 && (h.n_u != static_cast<std::uint64_t>(space->n_velocity()) ||
                      h.n_p != static_cast<std::uint64_t>(space->n_pressure()))) {
    throw Error(path.string() + ": snapshot dimensions (" + std::to_string(h.n_u) + ", " + std::to_string(h.n_p) +
                ") do not match the space (" + std::to_string(space->n_velocity()) + ", " +
                std::to_string(space->n_pressure()) + ")");
  }
  set.snapshots.reserve(h.count);
  for (std::uint64_t i = 0; i < h.count; ++i) {
    Snapshot s;
    s.t = r.pod<double>();
    Vector u(static_cast<Eigen::Index>(h.n_u)), p(static_cast<Eigen::Index>(h.n_p));
    r.bytes(u.data(), h.n_u * sizeof(double));
    r.bytes(p.data(), h.n_p * sizeof(double));
    s.u = Field::velocity(space, std::move(u), s.t);
    s.p = Field::pressure(space, std::move(p), s.t);
    set.snapshots.push_back(std::move(s));
  }
  return set;
}

void write_basis(const ReducedBasis& b, const nlohmann::json& metadata, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kBasisMagic, 8);
  w.pod(kFormatVersion);
  w.json(metadata);
  w.pod<std::int64_t>(b.r_u);
  w.pod<std::int64_t>(b.r_s);
  w.pod<std::int64_t>(b.r_p);
  w.vector(b.lift);
  w.matrix(b.velocity);
  w.matrix(b.pressure);
  w.vector(b.velocity_eigenvalues);
  w.vector(b.supremizer_eigenvalues);
  w.vector(b.pressure_eigenvalues);
  w.close();
}

ReducedBasis read_basis(const std::filesystem::path& path, nlohmann::json* metadata) {
  Reader r(path);
  r.header(kBasisMagic, "basis");
  auto meta = r.json();
  if (metadata) *metadata = std::move(meta);
  ReducedBasis b;
  b.r_u = static_cast<int>(r.pod<std::int64_t>());
  b.r_s = static_cast<int>(r.pod<std::int64_t>());
  b.r_p = static_cast<int>(r.pod<std::int64_t>());
  b.lift = r.vector();
  b.velocity = r.matrix();
  b.pressure = r.matrix();
  b.velocity_eigenvalues = r.vector();
  b.supremizer_eigenvalues = r.vector();
  b.pressure_eigenvalues = r.vector();
  if (b.velocity.cols() != b.r_us() || b.pressure.cols() != b.r_p || b.velocity.rows() != b.lift.size()) {
    throw Error(path.string() + ": basis dimensions are inconsistent");
  }
  return b;
}

void write_reduced_operators(const ReducedOperators& o, const nlohmann::json& metadata,
                             const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kOperatorsMagic, 8);
  w.pod(kFormatVersion);
  w.json(metadata);
  w.pod<std::int64_t>(o.r_us);
  w.pod<std::int64_t>(o.r_p);
  for (const DenseMatrix* m : {&o.mass, &o.stiffness, &o.graddiv, &o.divergence, &o.conv_lift_convecting,
                               &o.conv_lift_convected}) {
    w.matrix(*m);
  }
  for (const Vector* v : {&o.mass_lift, &o.stiffness_lift, &o.graddiv_lift, &o.divergence_lift, &o.conv_lift_both}) {
    w.vector(*v);
  }
  w.pod<std::uint64_t>(o.tensor.size());
  w.doubles(o.tensor.data(), o.tensor.size());
  w.close();
}

ReducedOperators read_reduced_operators(const std::filesystem::path& path, nlohmann::json* metadata) {
  Reader r(path);
  r.header(kOperatorsMagic, "reduced-operator");
  auto meta = r.json();
  if (metadata) *metadata = std::move(meta);
  ReducedOperators o;
  o.r_us = static_cast<int>(r.pod<std::int64_t>());
  o.r_p = static_cast<int>(r.pod<std::int64_t>());
  for (DenseMatrix* m : {&o.mass, &o.stiffness, &o.graddiv, &o.divergence, &o.conv_lift_convecting,
                         &o.conv_lift_convected}) {
    *m = r.matrix();
  }
  for (Vector* v : {&o.mass_lift, &o.stiffness_lift, &o.graddiv_lift, &o.divergence_lift, &o.conv_lift_both}) {
    *v = r.vector();
  }
  const auto n = r.size();
  const auto r3 = static_cast<std::uint64_t>(o.r_us) * o.r_us * o.r_us;
  if (n != r3) throw Error(path.string() + ": tensor length does not match r_us³");
  o.tensor.resize(n);
  r.bytes(o.tensor.data(), n * sizeof(double));
  return o;
}

// ---------------------------------------------------------------------------

void export_vtk(const Field& u, const Field& p, const std::filesystem::path& path) {
  u.check();
  p.check();
  if (u.space != p.space) throw Error("export_vtk: fields live on different spaces");
  const auto& sp = *u.space;
  const auto& mesh = sp.mesh();
  const int nv = static_cast<int>(mesh.n_vertices());
  const int nn = sp.n_nodes();
  // Vorticity at vertices: average of the element-wise values.
  std::vector<double> vort(static_cast<std::size_t>(nv), 0.0);
  std::vector<int> count(static_cast<std::size_t>(nv), 0);
  for (std::size_t k = 0; k < mesh.n_triangles(); ++k) {
    const auto& t = mesh.triangles()[k];
    for (int a = 0; a < 3; ++a) {
      std::array<double, 3> l{0.0, 0.0, 0.0};
      l[a] = 1.0;
      const auto g = evaluate_velocity(sp, u.coeffs, k, l).grad;
      vort[t[a]] += g[1][0] - g[0][1];
      ++count[t[a]];
    }
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << std::setprecision(17);
  os << "# vtk DataFile Version 3.0\nefvms t=" << u.time << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nv << " double\n";
  for (const auto& v : mesh.vertices()) os << v.x << ' ' << v.y << " 0\n";
  os << "CELLS " << mesh.n_triangles() << ' ' << 4 * mesh.n_triangles() << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << mesh.n_triangles() << '\n';
  for (std::size_t k = 0; k < mesh.n_triangles(); ++k) os << "5\n";
  os << "POINT_DATA " << nv << "\nVECTORS velocity double\n";
  for (int v = 0; v < nv; ++v) os << u.coeffs[v] << ' ' << u.coeffs[nn + v] << " 0\n";
  os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < nv; ++v) os << p.coeffs[v] << '\n';
  os << "SCALARS vorticity double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < nv; ++v) os << (count[v] ? vort[v] / count[v] : 0.0) << '\n';
  if (!os) throw Error("write failed: " + path.string());
}

VtkData read_vtk(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  VtkData d;
  std::string word;
  std::size_t n_points = 0;
  auto fail = [&](const std::string& what) { return Error(path.string() + ": " + what); };
  while (is >> word) {
    if (word == "POINTS") {
      std::string type;
      is >> n_points >> type;
      d.points.resize(n_points);
      double z;
      for (auto& p : d.points) is >> p.x >> p.y >> z;
    } else if (word == "CELLS") {
      std::size_t n, total;
      is >> n >> total;
      d.cells.resize(n);
      for (auto& c : d.cells) {
        int k;
        is >> k;
        if (k != 3) throw fail("only triangles are supported");
        is >> c[0] >> c[1] >> c[2];
      }
    } else if (word == "SCALARS") {
      std::string name, type, lookup, table;
      int comps;
      is >> name >> type >> comps >> lookup >> table;
      auto& v = d.scalars[name];
      v.resize(n_points);
      for (auto& x : v) is >> x;
    } else if (word == "VECTORS") {
      std::string name, type;
      is >> name >> type;
      auto& v = d.vectors[name];
      v.resize(n_points);
      for (auto& x : v) is >> x[0] >> x[1] >> x[2];
    }
    if (is.bad()) throw fail("read error");
  }
  if (d.points.empty()) throw fail("no POINTS section");
  return d;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [stage, seconds] : timings) t[stage] = seconds;
  return {{"config", config},
          {"mesh_hash", mesh_hash},
          {"code_version", code_version},
          {"wall_clock_seconds", wall_clock_seconds},
          {"timings", t},
          {"outputs", outputs}};
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << to_json().dump(2) << '\n';
  if (!os) throw Error("write failed: " + path.string());
}

}  // namespace efvms
