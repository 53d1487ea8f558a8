#include "botda/pipeline_io.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <unistd.h>

#include "botda/errors.hpp"

namespace botda {

// ---------------------------------------------------------------------------
// Scenario configuration

FiberProfile ScenarioConfig::fiber_profile() const {
  std::vector<Hotspot> hs;
  for (const HotspotConfig& h : fiber.hotspots) hs.push_back({h.start_m, h.length_m, h.bfs_ghz * 1e9});
  return FiberProfile(fiber.length_m, fiber.base_bfs_ghz * 1e9, std::move(hs),
                      fiber.linewidth_mhz * 1e6, fiber.gain_scale);
}

PulseScheme ScenarioConfig::pulse_scheme() const {
  return pulse.kind == PulseKind::Single
             ? PulseScheme::single(pulse.width_long_ns * 1e-9)
             : PulseScheme::pair(pulse.width_long_ns * 1e-9, pulse.width_short_ns * 1e-9);
}

SamplingGrid ScenarioConfig::sampling_grid() const {
  return SamplingGrid::covering(fiber.length_m, grid.lead_ns * 1e-9, grid.sample_rate_gsps * 1e9,
                                grid.group_velocity_m_per_s);
}

FrequencySweep ScenarioConfig::frequency_sweep() const {
  return {sweep.start_ghz * 1e9, sweep.step_mhz * 1e6, sweep.count};
}

std::optional<NoiseSpec> ScenarioConfig::noise_spec() const {
  if (!noise.snr_db || std::isinf(*noise.snr_db)) return std::nullopt;
  return NoiseSpec{*noise.snr_db, noise.seed, noise.convention};
}

DeconvConfig ScenarioConfig::solver_config() const {
  DeconvConfig c;
  c.mu = deconv.mu;
  c.max_iters = deconv.max_iters;
  c.rel_tolerance = deconv.rel_tolerance;
  c.penalty_rho = deconv.penalty_rho;
  c.nonneg = deconv.nonneg;
  return c;
}

KernelOptions ScenarioConfig::kernel_options() const {
  return {pulse.allow_short_pair, deconv.kernel_sampling};
}

void ScenarioConfig::validate() const {
  try {
    const FiberProfile f = fiber_profile();
    const PulseScheme p = pulse_scheme();
    p.validate();
    check_pair_widths(p, f.linewidth_hz(), pulse.allow_short_pair);
    if (!(grid.group_velocity_m_per_s > 0.0))
      throw ValidationError("grid.group_velocity_m_per_s must be positive");
    if (grid.lead_ns < pulse.width_long_ns)
      throw ValidationError("grid.lead_ns must be at least pulse.width_long_ns so the trace "
                            "covers the pulse leaving the fiber");
    sampling_grid();
    if (sweep.count < 1) throw ValidationError("sweep.count must be at least 1");
    if (!(sweep.step_mhz > 0.0)) throw ValidationError("sweep.step_mhz must be positive");
    if (!(sweep.start_ghz > 0.0)) throw ValidationError("sweep.start_ghz must be positive");
    if (noise.snr_db && std::isnan(*noise.snr_db)) throw ValidationError("noise.snr_db is NaN");
    if (noise.realizations < 1) throw ValidationError("noise.realizations must be at least 1");
    solver_config().validate();
    if (deconv.mode == DeconvMode::Tolerance && !(deconv.tolerance_mhz > 0.0))
      throw ValidationError("deconv.tolerance_mhz must be positive");
    for (const std::string& fmt : output.formats)
      if (fmt != "bgs" && fmt != "csv" && fmt != "svg")
        throw ValidationError("output.formats: unknown format '" + fmt + "' (bgs, csv, svg)");
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(e.what());
  }
}

namespace {

[[noreturn]] void fail_at(const YAML::Mark& m, const std::string& msg) {
  throw ParseError(msg, m.line + 1, m.column + 1);
}

void require_map(const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) fail_at(n.Mark(), where + " must be a mapping");
}

void check_keys(const YAML::Node& map, const std::string& section,
                std::initializer_list<std::string_view> allowed) {
  for (auto it = map.begin(); it != map.end(); ++it) {
    const std::string key = it->first.Scalar();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (std::string_view a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      fail_at(it->first.Mark(), "unknown key '" + key + "' in " + section + " (expected one of: " +
                                    list + ")");
    }
  }
}

template <class T>
void read_value(const YAML::Node& map, const char* key, const std::string& section, T& out) {
  const YAML::Node n = map[key];
  if (!n) return;
  try {
    out = n.as<T>();
  } catch (const YAML::BadConversion&) {
    fail_at(n.Mark(), section + "." + key + ": cannot read '" + (n.IsScalar() ? n.Scalar() : "") +
                          "' as the expected type");
  }
}

void read_count(const YAML::Node& map, const char* key, const std::string& section,
                std::size_t& out) {
  long long v = static_cast<long long>(out);
  read_value(map, key, section, v);
  if (v < 0) fail_at(map[key].Mark(), section + "." + key + " must be non-negative");
  out = static_cast<std::size_t>(v);
}

template <class E, std::size_t N>
using NameTable = std::array<std::pair<std::string_view, E>, N>;

template <class E, std::size_t N>
void read_enum(const YAML::Node& map, const char* key, const std::string& section, E& out,
               const NameTable<E, N>& names) {
  const YAML::Node n = map[key];
  if (!n) return;
  const std::string s = n.IsScalar() ? n.Scalar() : "";
  std::string list;
  for (const auto& [name, value] : names) {
    if (s == name) {
      out = value;
      return;
    }
    list += (list.empty() ? "" : ", ") + std::string(name);
  }
  fail_at(n.Mark(), section + "." + key + ": '" + s + "' is not one of: " + list);
}

YAML::Node section_node(const YAML::Node& root, const char* name) {
  const YAML::Node n = root[name];
  if (n) require_map(n, name);
  return n;
}

constexpr NameTable<PulseKind, 2> kPulseKinds{{
    {"single", PulseKind::Single}, {"pair", PulseKind::Pair}}};
constexpr NameTable<SnrConvention, 2> kConventions{{
    {"amplitude", SnrConvention::Amplitude}, {"ratio", SnrConvention::Ratio}}};
constexpr NameTable<DeconvMode, 2> kModes{{
    {"mu", DeconvMode::Mu}, {"tolerance", DeconvMode::Tolerance}}};
constexpr NameTable<KernelSampling, 2> kSamplings{{
    {"point", KernelSampling::Point}, {"cell_average", KernelSampling::CellAverage}}};

template <class E, std::size_t N>
std::string_view enum_name(E value, const NameTable<E, N>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "?";
}

ScenarioConfig from_yaml(const YAML::Node& root) {
  ScenarioConfig c;
  if (!root || root.IsNull()) return c;
  require_map(root, "the scenario");
  check_keys(root, "the top level",
             {"name", "fiber", "pulse", "grid", "sweep", "noise", "deconv", "output"});
  read_value(root, "name", "top level", c.name);

  if (const YAML::Node f = section_node(root, "fiber")) {
    check_keys(f, "fiber", {"length_m", "base_bfs_ghz", "linewidth_mhz", "gain_scale", "hotspots"});
    read_value(f, "length_m", "fiber", c.fiber.length_m);
    read_value(f, "base_bfs_ghz", "fiber", c.fiber.base_bfs_ghz);
    read_value(f, "linewidth_mhz", "fiber", c.fiber.linewidth_mhz);
    read_value(f, "gain_scale", "fiber", c.fiber.gain_scale);
    if (const YAML::Node hs = f["hotspots"]) {
      if (!hs.IsSequence()) fail_at(hs.Mark(), "fiber.hotspots must be a list");
      for (const YAML::Node& h : hs) {
        require_map(h, "each hotspot");
        check_keys(h, "fiber.hotspots", {"start_m", "length_m", "bfs_ghz"});
        for (const char* k : {"start_m", "length_m", "bfs_ghz"})
          if (!h[k]) fail_at(h.Mark(), std::string("hotspot is missing ") + k);
        HotspotConfig hc;
        read_value(h, "start_m", "fiber.hotspots", hc.start_m);
        read_value(h, "length_m", "fiber.hotspots", hc.length_m);
        read_value(h, "bfs_ghz", "fiber.hotspots", hc.bfs_ghz);
        c.fiber.hotspots.push_back(hc);
      }
    }
  }
  if (const YAML::Node p = section_node(root, "pulse")) {
    check_keys(p, "pulse", {"kind", "width_long_ns", "width_short_ns", "allow_short_pair"});
    read_enum(p, "kind", "pulse", c.pulse.kind, kPulseKinds);
    read_value(p, "width_long_ns", "pulse", c.pulse.width_long_ns);
    read_value(p, "width_short_ns", "pulse", c.pulse.width_short_ns);
    read_value(p, "allow_short_pair", "pulse", c.pulse.allow_short_pair);
  }
  if (const YAML::Node g = section_node(root, "grid")) {
    check_keys(g, "grid", {"sample_rate_gsps", "group_velocity_m_per_s", "lead_ns"});
    read_value(g, "sample_rate_gsps", "grid", c.grid.sample_rate_gsps);
    read_value(g, "group_velocity_m_per_s", "grid", c.grid.group_velocity_m_per_s);
    read_value(g, "lead_ns", "grid", c.grid.lead_ns);
  }
  if (const YAML::Node s = section_node(root, "sweep")) {
    check_keys(s, "sweep", {"start_ghz", "step_mhz", "count"});
    read_value(s, "start_ghz", "sweep", c.sweep.start_ghz);
    read_value(s, "step_mhz", "sweep", c.sweep.step_mhz);
    read_count(s, "count", "sweep", c.sweep.count);
  }
  if (const YAML::Node n = section_node(root, "noise")) {
    check_keys(n, "noise", {"snr_db", "convention", "seed", "realizations"});
    if (const YAML::Node snr = n["snr_db"]; snr && !snr.IsNull()) {
      double v = 0.0;
      read_value(n, "snr_db", "noise", v);
      c.noise.snr_db = v;
    }
    read_enum(n, "convention", "noise", c.noise.convention, kConventions);
    read_value(n, "seed", "noise", c.noise.seed);
    read_value(n, "realizations", "noise", c.noise.realizations);
  }
  if (const YAML::Node d = section_node(root, "deconv")) {
    check_keys(d, "deconv", {"mode", "mu", "tolerance_mhz", "max_iters", "rel_tolerance",
                             "penalty_rho", "nonneg", "kernel_sampling"});
    read_enum(d, "mode", "deconv", c.deconv.mode, kModes);
    read_value(d, "mu", "deconv", c.deconv.mu);
    read_value(d, "tolerance_mhz", "deconv", c.deconv.tolerance_mhz);
    read_value(d, "max_iters", "deconv", c.deconv.max_iters);
    read_value(d, "rel_tolerance", "deconv", c.deconv.rel_tolerance);
    read_value(d, "penalty_rho", "deconv", c.deconv.penalty_rho);
    read_value(d, "nonneg", "deconv", c.deconv.nonneg);
    read_enum(d, "kernel_sampling", "deconv", c.deconv.kernel_sampling, kSamplings);
  }
  if (const YAML::Node o = section_node(root, "output")) {
    check_keys(o, "output", {"directory", "formats"});
    read_value(o, "directory", "output", c.output.directory);
    read_value(o, "formats", "output", c.output.formats);
  }
  return c;
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  if (std::isnan(v)) return ".nan";
  return fmt::format("{}", v);
}

std::string quoted(const std::string& s) {
  YAML::Emitter e;
  e << YAML::DoubleQuoted << s;
  return e.c_str();
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  ScenarioConfig c = from_yaml(root);
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_string(const ScenarioConfig& c) {
  std::string out;
  auto line = [&out](const std::string& s) { out += s + "\n"; };
  line("name: " + quoted(c.name));
  line("fiber:");
  line("  length_m: " + num(c.fiber.length_m));
  line("  base_bfs_ghz: " + num(c.fiber.base_bfs_ghz));
  line("  linewidth_mhz: " + num(c.fiber.linewidth_mhz));
  line("  gain_scale: " + num(c.fiber.gain_scale));
  if (c.fiber.hotspots.empty()) {
    line("  hotspots: []");
  } else {
    line("  hotspots:");
    for (const HotspotConfig& h : c.fiber.hotspots)
      line("    - {start_m: " + num(h.start_m) + ", length_m: " + num(h.length_m) +
           ", bfs_ghz: " + num(h.bfs_ghz) + "}");
  }
  line("pulse:");
  line("  kind: " + std::string(enum_name(c.pulse.kind, kPulseKinds)));
  line("  width_long_ns: " + num(c.pulse.width_long_ns));
  line("  width_short_ns: " + num(c.pulse.width_short_ns));
  line(std::string("  allow_short_pair: ") + (c.pulse.allow_short_pair ? "true" : "false"));
  line("grid:");
  line("  sample_rate_gsps: " + num(c.grid.sample_rate_gsps));
  line("  group_velocity_m_per_s: " + num(c.grid.group_velocity_m_per_s));
  line("  lead_ns: " + num(c.grid.lead_ns));
  line("sweep:");
  line("  start_ghz: " + num(c.sweep.start_ghz));
  line("  step_mhz: " + num(c.sweep.step_mhz));
  line("  count: " + std::to_string(c.sweep.count));
  line("noise:");
  line("  snr_db: " + (c.noise.snr_db ? num(*c.noise.snr_db) : std::string("~")));
  line("  convention: " + std::string(enum_name(c.noise.convention, kConventions)));
  line("  seed: " + std::to_string(c.noise.seed));
  line("  realizations: " + std::to_string(c.noise.realizations));
  line("deconv:");
  line("  mode: " + std::string(enum_name(c.deconv.mode, kModes)));
  line("  mu: " + num(c.deconv.mu));
  line("  tolerance_mhz: " + num(c.deconv.tolerance_mhz));
  line("  max_iters: " + std::to_string(c.deconv.max_iters));
  line("  rel_tolerance: " + num(c.deconv.rel_tolerance));
  line("  penalty_rho: " + num(c.deconv.penalty_rho));
  line(std::string("  nonneg: ") + (c.deconv.nonneg ? "true" : "false"));
  line("  kernel_sampling: " + std::string(enum_name(c.deconv.kernel_sampling, kSamplings)));
  line("output:");
  line("  directory: " + quoted(c.output.directory));
  std::string formats;
  for (const std::string& f : c.output.formats) formats += (formats.empty() ? "" : ", ") + quoted(f);
  line("  formats: [" + formats + "]");
  return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mutex& path_mutex(const std::filesystem::path& path) {
  static std::mutex registry_mutex;
  static std::map<std::string, std::unique_ptr<std::mutex>> registry;
  const std::string key = std::filesystem::absolute(path).lexically_normal().string();
  std::lock_guard lock(registry_mutex);
  auto& slot = registry[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

/// Writes through `path.tmp.<pid>` and renames, holding the per-path lock.
template <class Fn>
void write_atomically(const std::filesystem::path& path, Fn&& body) {
  std::lock_guard lock(path_mutex(path));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path) {
  const std::string text = scenario_to_string(config);
  write_atomically(path, [&](std::ofstream& out) { out << text; });
}

std::string hash_text(std::string_view text) { return fmt::format("{:016x}", fnv1a(text)); }

std::string config_hash(const ScenarioConfig& config) {
  return hash_text(scenario_to_string(config));
}

std::string provenance_comment(const std::string& hash, std::optional<std::uint64_t> seed) {
  return "# config_hash=" + hash + " seed=" + (seed ? std::to_string(*seed) : std::string("none"));
}

// ---------------------------------------------------------------------------
// Binary BGS maps

namespace {

constexpr std::string_view kMagic = "BOTDA-BGS 1";
constexpr std::string_view kEndHeader = "end_header";
constexpr std::size_t kMaxHeaderBytes = 1 << 16;

void put_f64_le(std::string& buf, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

double parse_double(const std::string& s, const std::string& key) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw CorruptionError("header field " + key + " is not a number: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw CorruptionError("header field " + key + " is not an unsigned integer: '" + s + "'");
  return v;
}

bool parse_flag(const std::string& s, const std::string& key) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw CorruptionError("header field " + key + " must be true or false");
}

std::string header_text(const BgsMap& map, const std::optional<std::string>& hash) {
  const SamplingGrid& g = map.grid();
  const TraceMeta& m = map.meta();
  std::string h;
  auto field = [&h](std::string_view key, const std::string& value) {
    h += fmt::format("{} {}\n", key, value);
  };
  h += std::string(kMagic) + "\n";
  field("layout", "float64-le row-major frequency x time");
  field("units", "frequency=Hz time=s velocity=m/s");
  field("sweep_start_hz", fmt::format("{}", map.sweep.start_hz));
  field("sweep_step_hz", fmt::format("{}", map.sweep.step_hz));
  field("n_freqs", std::to_string(map.sweep.count));
  field("n_samples", std::to_string(g.n_samples));
  field("dt_s", fmt::format("{}", g.dt_s));
  field("t0_s", fmt::format("{}", g.t0_s));
  field("group_velocity_m_per_s", fmt::format("{}", g.group_velocity_m_per_s));
  field("pulse_kind", m.pulse.kind == PulseKind::Single ? "single" : "pair");
  field("pulse_width_long_s", fmt::format("{}", m.pulse.width_long_s));
  field("pulse_width_short_s", fmt::format("{}", m.pulse.width_short_s));
  field("normalized", m.normalized ? "true" : "false");
  field("recovered", m.recovered ? "true" : "false");
  field("seed", m.seed ? std::to_string(*m.seed) : "none");
  field("config_hash", hash.value_or("none"));
  h += std::string(kEndHeader) + "\n";
  return h;
}

BgsHeader parse_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw CorruptionError("not a BGS map file");
  std::map<std::string, std::string> fields;
  std::size_t consumed = line.size() + 1;
  bool ended = false;
  while (std::getline(in, line)) {
    consumed += line.size() + 1;
    if (consumed > kMaxHeaderBytes) throw CorruptionError("BGS header too long");
    if (line == kEndHeader) {
      ended = true;
      break;
    }
    const auto space = line.find(' ');
    if (space == std::string::npos) throw CorruptionError("malformed header line '" + line + "'");
    fields[line.substr(0, space)] = line.substr(space + 1);
  }
  if (!ended) throw CorruptionError("BGS header is truncated (no end_header)");
  auto get = [&fields](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw CorruptionError("BGS header is missing " + key);
    return it->second;
  };
  BgsHeader h;
  h.sweep.start_hz = parse_double(get("sweep_start_hz"), "sweep_start_hz");
  h.sweep.step_hz = parse_double(get("sweep_step_hz"), "sweep_step_hz");
  h.sweep.count = parse_u64(get("n_freqs"), "n_freqs");
  h.grid.n_samples = parse_u64(get("n_samples"), "n_samples");
  h.grid.dt_s = parse_double(get("dt_s"), "dt_s");
  h.grid.t0_s = parse_double(get("t0_s"), "t0_s");
  h.grid.group_velocity_m_per_s =
      parse_double(get("group_velocity_m_per_s"), "group_velocity_m_per_s");
  const std::string& kind = get("pulse_kind");
  if (kind != "single" && kind != "pair") throw CorruptionError("unknown pulse_kind " + kind);
  h.meta.pulse.kind = kind == "single" ? PulseKind::Single : PulseKind::Pair;
  h.meta.pulse.width_long_s = parse_double(get("pulse_width_long_s"), "pulse_width_long_s");
  h.meta.pulse.width_short_s = parse_double(get("pulse_width_short_s"), "pulse_width_short_s");
  h.meta.normalized = parse_flag(get("normalized"), "normalized");
  h.meta.recovered = parse_flag(get("recovered"), "recovered");
  if (const std::string& s = get("seed"); s != "none") h.meta.seed = parse_u64(s, "seed");
  if (const std::string& s = get("config_hash"); s != "none") h.config_hash = s;
  h.payload_offset = consumed;
  if (h.sweep.count == 0 || h.grid.n_samples == 0) throw CorruptionError("BGS map has empty axes");
  if (h.sweep.count > (std::size_t{1} << 40) / std::max<std::size_t>(h.grid.n_samples, 1))
    throw CorruptionError("BGS axes are implausibly large");
  return h;
}

BgsHeader inspect_stream(std::ifstream& in, const std::filesystem::path& path) {
  BgsHeader h = parse_header(in);
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw CorruptionError("cannot stat " + path.string());
  const std::size_t expected = h.payload_offset + h.payload_bytes();
  if (size < expected)
    throw CorruptionError(fmt::format("{}: payload truncated ({} of {} bytes)", path.string(),
                                      size - std::min<std::size_t>(size, h.payload_offset),
                                      h.payload_bytes()));
  if (size > expected)
    throw CorruptionError(fmt::format("{}: {} bytes after the payload", path.string(),
                                      size - expected));
  return h;
}

}  // namespace

void write_bgs(const std::filesystem::path& path, const BgsMap& map,
               const std::optional<std::string>& hash) {
  map.validate();
  std::string buf = header_text(map, hash);
  buf.reserve(buf.size() + map.n_freqs() * map.n_samples() * sizeof(double));
  for (const GainTrace& t : map.traces)
    for (double v : t.samples) put_f64_le(buf, v);
  write_atomically(path, [&](std::ofstream& out) { out.write(buf.data(), static_cast<std::streamsize>(buf.size())); });
}

BgsHeader inspect_bgs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return inspect_stream(in, path);
}

BgsMap read_bgs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  const BgsHeader h = inspect_stream(in, path);
  in.seekg(static_cast<std::streamoff>(h.payload_offset));
  std::vector<unsigned char> raw(h.payload_bytes());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw CorruptionError(path.string() + ": payload truncated while reading");
  BgsMap map;
  map.sweep = h.sweep;
  map.traces.resize(h.sweep.count);
  const std::size_t n = h.grid.n_samples;
  for (std::size_t i = 0; i < h.sweep.count; ++i) {
    GainTrace& t = map.traces[i];
    t.probe_offset_hz = h.sweep.at(i);
    t.grid = h.grid;
    t.meta = h.meta;
    t.samples.resize(n);
    const unsigned char* row = raw.data() + i * n * sizeof(double);
    for (std::size_t k = 0; k < n; ++k) t.samples[k] = get_f64_le(row + k * sizeof(double));
  }
  try {
    map.validate();
  } catch (const ContractError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  return map;
}

// ---------------------------------------------------------------------------
// Delimited-text ingestion

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

IngestedData ingest_csv(std::string_view text, const CsvSchema& schema) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view l = trim(text.substr(pos, end - pos));
    if (!l.empty() && l.front() != '#') lines.push_back(l);
    pos = end + 1;
  }
  if (lines.empty()) throw IngestError("file has no header row", 0);
  const std::vector<std::string_view> header = split(lines.front(), schema.delimiter);
  const auto time_it = std::find(header.begin(), header.end(), schema.time_column);
  if (time_it == header.end())
    throw IngestError("no time column named '" + schema.time_column + "'", 0);
  const auto time_col = static_cast<std::size_t>(time_it - header.begin());

  std::vector<std::size_t> gain_cols;
  if (schema.gain_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != time_col) gain_cols.push_back(c);
  } else {
    for (const std::string& name : schema.gain_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw IngestError("no gain column named '" + name + "'", 0);
      gain_cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  if (gain_cols.empty()) throw IngestError("no gain columns", 0);

  const std::size_t n = lines.size() - 1;
  if (n < 2) throw IngestError("need at least two data rows", static_cast<long>(n));
  std::vector<double> time(n);
  std::vector<std::vector<double>> gains(gain_cols.size(), std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const long row = static_cast<long>(r) + 1;
    const std::vector<std::string_view> cells = split(lines[r + 1], schema.delimiter);
    if (cells.size() != header.size())
      throw IngestError(fmt::format("expected {} columns, found {}", header.size(), cells.size()),
                        row);
    const auto t = to_double(cells[time_col]);
    if (!t) throw IngestError("time value '" + std::string(cells[time_col]) + "' is not a number", row);
    time[r] = *t * schema.time_unit_s;
    for (std::size_t g = 0; g < gain_cols.size(); ++g) {
      const auto v = to_double(cells[gain_cols[g]]);
      if (!v) throw IngestError("gain value '" + std::string(cells[gain_cols[g]]) + "' is not a number", row);
      gains[g][r] = *v;
    }
  }
  for (std::size_t r = 1; r < n; ++r)
    if (!(time[r] > time[r - 1]))
      throw IngestError("time axis is not strictly increasing", static_cast<long>(r) + 1);
  const double dt = (time.back() - time.front()) / static_cast<double>(n - 1);
  for (std::size_t r = 1; r < n; ++r)
    if (std::abs((time[r] - time[r - 1]) - dt) > schema.max_jitter * dt)
      throw IngestError(fmt::format("time step {} s deviates from the mean step {} s by more than "
                                    "{}%", time[r] - time[r - 1], dt, schema.max_jitter * 100),
                        static_cast<long>(r) + 1);

  SamplingGrid grid;
  grid.dt_s = dt;
  grid.t0_s = time.front();
  grid.n_samples = n;
  grid.group_velocity_m_per_s = schema.group_velocity_m_per_s;
  grid.validate();
  TraceMeta meta;
  meta.pulse = schema.pulse;
  meta.normalized = schema.normalized;

  if (gain_cols.size() == 1) {
    GainTrace t;
    t.probe_offset_hz = schema.probe_offset_hz;
    t.samples = std::move(gains.front());
    t.grid = grid;
    t.meta = meta;
    return t;
  }

  std::vector<double> freqs;
  for (std::size_t c : gain_cols) {
    const auto f = to_double(header[c]);
    if (!f) throw IngestError("column label '" + std::string(header[c]) + "' is not a frequency", 0);
    freqs.push_back(*f * schema.frequency_unit_hz);
  }
  const double step = (freqs.back() - freqs.front()) / static_cast<double>(freqs.size() - 1);
  if (!(step > 0.0)) throw IngestError("frequency labels must increase", 0);
  for (std::size_t i = 1; i < freqs.size(); ++i)
    if (std::abs(freqs[i] - (freqs.front() + static_cast<double>(i) * step)) > 0.01 * step)
      throw IngestError("frequency labels are not evenly spaced (column " + std::to_string(gain_cols[i] + 1) + ")", 0);
  BgsMap map;
  map.sweep = {freqs.front(), step, freqs.size()};
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    GainTrace t;
    t.probe_offset_hz = map.sweep.at(i);
    t.samples = std::move(gains[i]);
    t.grid = grid;
    t.meta = meta;
    map.traces.push_back(std::move(t));
  }
  return map;
}

IngestedData ingest_external_trace(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string first;
  std::getline(in, first);
  if (first == kMagic) return read_bgs(path);
  in.seekg(0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ingest_csv(ss.str(), schema);
}

}  // namespace botda
