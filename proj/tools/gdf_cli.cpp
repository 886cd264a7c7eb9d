// gdf: command-line front end. Each run writes its artifacts plus a
// manifest.json from which the run can be replayed.

#include <gdf/gdf.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitUnexpected = 1;

int exit_code(gdf::ErrorCode c) {
  switch (c) {
    case gdf::ErrorCode::InvalidInput: return 3;
    case gdf::ErrorCode::LowDensity: return 4;
    case gdf::ErrorCode::EmptyResult: return 5;
    case gdf::ErrorCode::UnsupportedDimension: return 6;
    case gdf::ErrorCode::Numeric: return 7;
    case gdf::ErrorCode::IsolatedPoint: return 8;
    case gdf::ErrorCode::Ingestion: return 9;
    case gdf::ErrorCode::Io: return 10;
  }
  return kExitUnexpected;
}

struct Config {
  std::string command;
  // input: exactly one of these for every command except simulate
  std::string input, image, sdss;
  std::vector<std::string> columns;
  std::string weight_column = "weight";
  bool no_header = false;
  std::size_t rejection_budget = 0;
  double threshold = 0.15;
  bool flip_y = false;
  std::string mass_transform = "luminous";
  std::optional<double> z_min, z_max;

  std::optional<double> bandwidth;
  double step_tol = 1e-7;
  int max_iters = 500;
  double merge_radius = 0.5;
  std::optional<double> ridge_tol;
  std::optional<double> density_floor;
  std::string grid;
  std::uint64_t seed = 1;

  // simulate
  std::string model = "gaussian";
  std::string target = "mise";
  std::vector<std::size_t> ns = {250, 1000, 4000, 16000};
  double c = 1.0;
  double gamma = 0.2;
  std::size_t replicates = 10;
  int order = 0;
  std::size_t max_seeds = 300;
};

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
void get_opt(const json& j, const char* key, std::optional<T>& v) {
  if (j.contains(key) && !j[key].is_null()) v = j[key].get<T>();
}

json to_json(const Config& c) {
  json j = {{"command", c.command},
            {"input", c.input},
            {"image", c.image},
            {"sdss", c.sdss},
            {"columns", c.columns},
            {"weight_column", c.weight_column},
            {"no_header", c.no_header},
            {"rejection_budget", c.rejection_budget},
            {"threshold", c.threshold},
            {"flip_y", c.flip_y},
            {"mass_transform", c.mass_transform},
            {"step_tol", c.step_tol},
            {"max_iters", c.max_iters},
            {"merge_radius", c.merge_radius},
            {"grid", c.grid},
            {"seed", c.seed},
            {"model", c.model},
            {"target", c.target},
            {"ns", c.ns},
            {"c", c.c},
            {"gamma", c.gamma},
            {"replicates", c.replicates},
            {"order", c.order},
            {"max_seeds", c.max_seeds}};
  put_opt(j, "z_min", c.z_min);
  put_opt(j, "z_max", c.z_max);
  put_opt(j, "bandwidth", c.bandwidth);
  put_opt(j, "ridge_tol", c.ridge_tol);
  put_opt(j, "density_floor", c.density_floor);
  return j;
}

Config from_json(const json& j) {
  Config c;
  j.at("command").get_to(c.command);
  j.at("input").get_to(c.input);
  j.at("image").get_to(c.image);
  j.at("sdss").get_to(c.sdss);
  j.at("columns").get_to(c.columns);
  j.at("weight_column").get_to(c.weight_column);
  j.at("no_header").get_to(c.no_header);
  j.at("rejection_budget").get_to(c.rejection_budget);
  j.at("threshold").get_to(c.threshold);
  j.at("flip_y").get_to(c.flip_y);
  j.at("mass_transform").get_to(c.mass_transform);
  j.at("step_tol").get_to(c.step_tol);
  j.at("max_iters").get_to(c.max_iters);
  j.at("merge_radius").get_to(c.merge_radius);
  j.at("grid").get_to(c.grid);
  j.at("seed").get_to(c.seed);
  j.at("model").get_to(c.model);
  j.at("target").get_to(c.target);
  j.at("ns").get_to(c.ns);
  j.at("c").get_to(c.c);
  j.at("gamma").get_to(c.gamma);
  j.at("replicates").get_to(c.replicates);
  j.at("order").get_to(c.order);
  j.at("max_seeds").get_to(c.max_seeds);
  get_opt(j, "z_min", c.z_min);
  get_opt(j, "z_max", c.z_max);
  get_opt(j, "bandwidth", c.bandwidth);
  get_opt(j, "ridge_tol", c.ridge_tol);
  get_opt(j, "density_floor", c.density_floor);
  return c;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw gdf::Error(gdf::ErrorCode::Io, "SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw gdf::Error(gdf::ErrorCode::Ingestion, "cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw gdf::Error(gdf::ErrorCode::InvalidInput, msg);
}

void validate(const Config& c) {
  require(c.step_tol > 0.0, "--step-tol must be > 0");
  require(c.max_iters > 0, "--max-iters must be > 0");
  require(c.merge_radius > 0.0, "--merge-radius must be > 0");
  require(!c.ridge_tol || *c.ridge_tol > 0.0, "--ridge-tol must be > 0");
  require(!c.density_floor || *c.density_floor >= 0.0, "--density-floor must be >= 0");
  if (c.command == "simulate") return;
  require(c.bandwidth.has_value(), "--bandwidth is required for " + c.command);
  require(*c.bandwidth > 0.0, "--bandwidth must be > 0");
  const int sources = !c.input.empty() + !c.image.empty() + !c.sdss.empty();
  require(sources == 1, "exactly one of --input, --image, --sdss is required");
  require(c.input.empty() || !c.columns.empty(), "--columns is required with --input");
  require(c.mass_transform == "none" || c.mass_transform == "luminous", "--mass-transform must be none or luminous");
}

struct Loaded {
  gdf::WeightedSample sample;
  std::vector<std::string> inputs;
};

Loaded load(const Config& c) {
  if (!c.input.empty()) {
    gdf::CatalogSpec spec;
    spec.coordinate_columns = c.columns;
    spec.weight_column = c.weight_column;
    spec.has_header = !c.no_header;
    spec.rejection_budget = c.rejection_budget;
    return {gdf::load_catalog(c.input, spec).sample, {c.input}};
  }
  if (!c.image.empty()) {
    gdf::ImageSampleOptions opts;
    opts.threshold = c.threshold;
    opts.flip_y = c.flip_y;
    return {gdf::image_to_sample(gdf::read_pgm(c.image), opts), {c.image}};
  }
  gdf::SdssSpec spec;
  spec.transform = c.mass_transform == "luminous" ? gdf::MassTransform::Luminous : gdf::MassTransform::None;
  spec.rejection_budget = c.rejection_budget;
  if (c.z_min || c.z_max) spec.redshift_slice = std::make_pair(c.z_min.value_or(0.0), c.z_max.value_or(INFINITY));
  return {gdf::load_sdss_catalog(c.sdss, spec).sample, {c.sdss}};
}

gdf::AscentConfig ascent(const Config& c) {
  gdf::AscentConfig a;
  a.step_tol = c.step_tol;
  a.max_iters = c.max_iters;
  a.merge_radius = c.merge_radius;
  a.validate();
  return a;
}

/// "lo:hi:count" per axis, comma separated.
gdf::QuadratureGrid parse_grid(const std::string& spec, Eigen::Index dim) {
  std::vector<double> lo, hi;
  std::vector<int> res;
  std::stringstream axes(spec);
  std::string axis;
  while (std::getline(axes, axis, ',')) {
    double a = 0, b = 0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(axis);
    if (!(in >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof() || n < 1 || !(b > a)) {
      throw gdf::Error(gdf::ErrorCode::InvalidInput, "bad --grid axis '" + axis + "' (want lo:hi:count)");
    }
    lo.push_back(a);
    hi.push_back(b);
    res.push_back(n);
  }
  require(static_cast<Eigen::Index>(res.size()) == dim, "--grid needs one lo:hi:count per dimension");
  return {{Eigen::Map<gdf::Vector>(lo.data(), dim), Eigen::Map<gdf::Vector>(hi.data(), dim)}, res};
}

/// Bounding box of the data padded by 3h, 64 cells per axis (24 in 3-d and up).
gdf::QuadratureGrid default_grid(const gdf::WeightedSample& s, double h) {
  const int per_axis = s.dim() <= 2 ? 64 : 24;
  return {{s.points().rowwise().minCoeff().array() - 3.0 * h, s.points().rowwise().maxCoeff().array() + 3.0 * h},
          std::vector<int>(static_cast<std::size_t>(s.dim()), per_axis)};
}

std::string coord_header(Eigen::Index d) {
  std::string out;
  for (Eigen::Index j = 0; j < d; ++j) out += "x" + std::to_string(j) + ",";
  return out;
}

std::string coords(const gdf::Vector& v) {
  std::string out;
  for (Eigen::Index j = 0; j < v.size(); ++j) out += gdf::io::format_number(v[j]) + ",";
  return out;
}

using Artifacts = std::vector<std::pair<std::string, std::string>>;

std::string modes_table(const gdf::ModeSet& m, Eigen::Index d) {
  std::string out = coord_header(d) + "value,lambda1,basin_count\n";
  for (std::size_t j = 0; j < m.size(); ++j) {
    out += coords(m.modes[j]) + gdf::io::format_number(m.values[j]) + "," +
           gdf::io::format_number(m.top_eigenvalues[j]) + "," + std::to_string(m.basin_counts[j]) + "\n";
  }
  return out;
}

std::string labels_table(const std::vector<int>& labels) {
  std::string out = "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  return out;
}

Artifacts run_estimate(const Config& c, const gdf::GdfModel& m) {
  const auto d = m.dim();
  const auto grid = c.grid.empty() ? default_grid(m.sample(), m.bandwidth()) : parse_grid(c.grid, d);
  const auto nodes = grid.nodes();
  std::vector<std::string> rows(nodes.size());
  gdf::parallel_for(nodes.size(), [&](std::size_t i) {
    const auto all = gdf::gdf_all(m, nodes[i]);
    Eigen::SelfAdjointEigenSolver<gdf::Matrix> es(all.hessian, Eigen::EigenvaluesOnly);
    const gdf::Vector ev = es.eigenvalues().reverse();
    rows[i] = coords(nodes[i]) + gdf::io::format_number(all.value) + "," +
              gdf::io::format_number(all.gradient.norm()) + "," + gdf::io::format_number(ev[0]) + "," +
              (d >= 2 ? gdf::io::format_number(ev[1]) : std::string("nan")) + "\n";
  });
  std::string out = coord_header(d) + "f,grad_norm,lambda1,lambda2\n";
  for (const auto& r : rows) out += r;
  return {{"estimate.csv", out}};
}

Artifacts run_modes(const Config& c, const gdf::GdfModel& m) {
  const auto seeds = c.grid.empty() ? gdf::data_seeds(m.sample()) : parse_grid(c.grid, m.dim()).nodes();
  return {{"modes.csv", modes_table(gdf::collect_modes(m, seeds, ascent(c)), m.dim())}};
}

Artifacts run_ridges(const Config& c, const gdf::GdfModel& m) {
  gdf::RidgeOptions opts;
  opts.ridge_tol = c.ridge_tol;
  const auto seeds = gdf::data_seeds(m.sample());
  if (c.density_floor) {
    opts.density_floor = *c.density_floor;
  } else if (!c.image.empty()) {
    // Images: keep ridge points above the same fraction of the peak as the pixel threshold.
    double top = 0.0;
    for (const auto& s : seeds) top = std::max(top, gdf::gdf_value(m, s));
    opts.density_floor = c.threshold * top;
  }
  const auto r = gdf::trace_ridge_detailed(m, seeds, ascent(c), opts).ridge;
  std::string out = coord_header(m.dim()) + "value,projected_grad_norm,lambda2,seed\n";
  for (std::size_t i = 0; i < r.size(); ++i) {
    out += coords(r.points[i]) + gdf::io::format_number(r.values[i]) + "," +
           gdf::io::format_number(r.projected_grad_norms[i]) + "," + gdf::io::format_number(r.second_eigenvalues[i]) +
           "," + std::to_string(r.seed_indices[i]) + "\n";
  }
  return {{"ridges.csv", out}};
}

Artifacts run_cluster(const Config& c, const gdf::GdfModel& m) {
  const auto a = gdf::cluster(m, ascent(c));
  return {{"labels.csv", labels_table(a.labels)}, {"modes.csv", modes_table(a.modes, m.dim())}};
}

Artifacts run_connectivity(const Config& c, const gdf::GdfModel& m) {
  const auto a = gdf::cluster(m, ascent(c));
  const auto r = gdf::connectivity(m, a);
  return {{"labels.csv", labels_table(a.labels)},
          {"modes.csv", modes_table(a.modes, m.dim())},
          {"S.csv", gdf::io::matrix_csv(r.blocks.S)},
          {"T.csv", gdf::io::matrix_csv(r.blocks.T)},
          {"A.csv", gdf::io::matrix_csv(r.A)},
          {"omega.csv", gdf::io::matrix_csv(r.omega)}};
}

Artifacts run_simulate(const Config& c) {
  gdf::SyntheticModel model;
  if (c.model == "gaussian") {
    model = gdf::gaussian_model();
  } else if (c.model == "mixture") {
    model = gdf::mixture_model();
  } else if (c.model == "circle") {
    model = gdf::circle_model();
  } else {
    throw gdf::Error(gdf::ErrorCode::InvalidInput, "--model must be gaussian, mixture or circle");
  }
  gdf::RateTarget target;
  if (c.target == "mise") {
    target = gdf::RateTarget::Mise;
  } else if (c.target == "mode_hausdorff") {
    target = gdf::RateTarget::ModeHausdorff;
  } else if (c.target == "ridge_hausdorff") {
    target = gdf::RateTarget::RidgeHausdorff;
  } else {
    throw gdf::Error(gdf::ErrorCode::InvalidInput, "--target must be mise, mode_hausdorff or ridge_hausdorff");
  }
  gdf::RateOptions opts;
  opts.replicates = c.replicates;
  opts.seed = c.seed;
  opts.derivative_order = c.order;
  opts.ascent = ascent(c);
  opts.max_seeds = c.max_seeds;
  const auto report = gdf::rate_experiment(model, target, gdf::power_schedule(c.ns, c.c, c.gamma), opts);
  return {{"report.json", gdf::to_json(report).dump(2) + "\n"}, {"report.csv", gdf::report_csv(report)}};
}

int run(const Config& c, const fs::path& out_dir) {
  validate(c);
  Artifacts artifacts;
  json inputs = json::array();
  if (c.command == "simulate") {
    artifacts = run_simulate(c);
  } else {
    const Loaded data = load(c);
    for (const auto& p : data.inputs) inputs.push_back({{"path", p}, {"sha256", sha256_hex(read_bytes(p))}});
    const gdf::GdfModel model(data.sample, *c.bandwidth);
    if (c.command == "estimate") artifacts = run_estimate(c, model);
    else if (c.command == "modes") artifacts = run_modes(c, model);
    else if (c.command == "ridges") artifacts = run_ridges(c, model);
    else if (c.command == "cluster") artifacts = run_cluster(c, model);
    else if (c.command == "connectivity") artifacts = run_connectivity(c, model);
    else throw gdf::Error(gdf::ErrorCode::InvalidInput, "unknown command " + c.command);
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw gdf::Error(gdf::ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  json outputs = json::array();
  for (const auto& [name, body] : artifacts) {
    gdf::io::write_file_atomic(out_dir / name, body);
    outputs.push_back({{"file", name}, {"sha256", sha256_hex(body)}});
  }
  const json manifest = {{"tool", "gdf"},
                         {"version", GDF_VERSION},
                         {"config", to_json(c)},
                         {"seed", c.seed},
                         {"inputs", inputs},
                         {"outputs", outputs},
                         {"timestamp", utc_timestamp()}};
  gdf::io::write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

/// Re-runs a manifest's config after checking the inputs are unchanged.
int replay(const fs::path& manifest_path, const fs::path& out_dir) {
  json m;
  try {
    m = json::parse(read_bytes(manifest_path));
  } catch (const json::exception& e) {
    throw gdf::Error(gdf::ErrorCode::Ingestion, "unreadable manifest: " + std::string(e.what()));
  }
  for (const auto& in : m.at("inputs")) {
    const std::string path = in.at("path");
    if (sha256_hex(read_bytes(path)) != in.at("sha256").get<std::string>()) {
      throw gdf::Error(gdf::ErrorCode::Ingestion, "input " + path + " changed since the manifest was written");
    }
  }
  return run(from_json(m.at("config")), out_dir);
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  return s;
}

int fail(std::string_view code, int exit, const std::string& msg) {
  std::cerr << "gdf: error code=" << code << " exit=" << exit << " message=\"" << one_line(msg) << "\"\n";
  return exit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized density function toolkit: modes, ridges, clustering and connectivity of weighted points"};
  app.set_version_flag("--version", std::string(GDF_VERSION));
  app.require_subcommand(1);

  Config cfg;
  std::string out_dir, manifest;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", cfg.seed, "random seed (recorded in the manifest)");
    sub->add_option("--step-tol", cfg.step_tol, "stop when a step is below step_tol * h");
    sub->add_option("--max-iters", cfg.max_iters, "iteration cap per trajectory");
    sub->add_option("--merge-radius", cfg.merge_radius, "merge endpoints within merge_radius * h");
    if (!needs_data) return;
    sub->add_option("--bandwidth,-b", cfg.bandwidth, "kernel bandwidth h");
    sub->add_option("--input", cfg.input, "weighted CSV catalog");
    sub->add_option("--columns", cfg.columns, "coordinate columns (names or 0-based indices)")->delimiter(',');
    sub->add_option("--weight-column", cfg.weight_column, "weight column");
    sub->add_flag("--no-header", cfg.no_header, "CSV has no header row");
    sub->add_option("--rejection-budget", cfg.rejection_budget, "number of bad rows tolerated");
    sub->add_option("--image", cfg.image, "grayscale PGM image");
    sub->add_option("--threshold", cfg.threshold, "keep pixels with normalized intensity above this");
    sub->add_flag("--flip-y", cfg.flip_y, "y grows upward instead of in raster order");
    sub->add_option("--sdss", cfg.sdss, "SDSS-style catalog with ra,dec,z,r columns");
    sub->add_option("--mass-transform", cfg.mass_transform, "none | luminous (10^(-0.4 MASS))");
    sub->add_option("--z-min", cfg.z_min, "redshift slice lower bound");
    sub->add_option("--z-max", cfg.z_max, "redshift slice upper bound");
  };

  auto* estimate = app.add_subcommand("estimate", "evaluate f, |grad f| and Hessian eigenvalues on a grid");
  add_common(estimate, true);
  estimate->add_option("--grid", cfg.grid, "lo:hi:count per axis, comma separated");
  auto* modes = app.add_subcommand("modes", "locate local modes");
  add_common(modes, true);
  modes->add_option("--grid", cfg.grid, "seed from grid cell centres instead of the data");
  auto* ridges = app.add_subcommand("ridges", "trace ridge points with subspace-constrained mean shift");
  add_common(ridges, true);
  ridges->add_option("--ridge-tol", cfg.ridge_tol, "absolute projected-gradient tolerance");
  ridges->add_option("--density-floor", cfg.density_floor, "drop ridge points with f below this");
  auto* clus = app.add_subcommand("cluster", "mode clustering of the data points");
  add_common(clus, true);
  auto* conn = app.add_subcommand("connectivity", "cluster, then absorbing-chain connectivity between clusters");
  add_common(conn, true);
  auto* sim = app.add_subcommand("simulate", "convergence experiment on a synthetic model");
  add_common(sim, false);
  sim->add_option("--model", cfg.model, "gaussian | mixture | circle");
  sim->add_option("--target", cfg.target, "mise | mode_hausdorff | ridge_hausdorff");
  sim->add_option("--ns", cfg.ns, "sample sizes")->delimiter(',');
  sim->add_option("--c", cfg.c, "bandwidth constant: h = c n^-gamma");
  sim->add_option("--gamma", cfg.gamma, "bandwidth exponent");
  sim->add_option("--replicates", cfg.replicates, "replicates per cell (>= 10)");
  sim->add_option("--order", cfg.order, "derivative order for mise (0, 1 or 2)");
  sim->add_option("--max-seeds", cfg.max_seeds, "seeds per replicate for mode and ridge targets");
  auto* rep = app.add_subcommand("replay", "re-run the configuration stored in a manifest");
  rep->add_option("manifest", manifest, "manifest.json")->required();
  rep->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", kExitUsage, e.what());
  }

  try {
    if (rep->parsed()) return replay(manifest, out_dir);
    cfg.command = app.get_subcommands().front()->get_name();
    return run(cfg, out_dir);
  } catch (const gdf::Error& e) {
    return fail(gdf::to_string(e.code()), exit_code(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail("unexpected", kExitUnexpected, e.what());
  }
}
