#include "mrieval/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "mrieval/csv.hpp"
#include "mrieval/error.hpp"
#include "mrieval/mmd.hpp"
#include "mrieval/nifti.hpp"

namespace mrieval {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"evaluation", {"model_name", "seed", "threads"}},
      {"inputs", {"real", "synth", "region_table"}},
      {"geometry", {"shape", "spacing", "intensity_tolerance"}},
      {"metrics",
       {"embedding_tags", "feature_kernel", "image_kernel", "image_mmd", "ms_ssim", "ms_ssim_pairs", "ms_ssim_scales",
        "ms_ssim_window", "ms_ssim_sigma", "ms_ssim_weights"}},
      {"qc", {"threshold", "target_real_fail_fraction", "grid_step", "min_model_pass_rate", "regions"}},
      {"anatomy", {"icv_fit", "flag_threshold"}},
      {"phantom",
       {"count", "region_jitter", "global_jitter", "stratified", "noise_sigma", "scale", "qc_fail", "embedding_dim"}},
  };
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(std::move(t));
  return out;
}

template <class T>
T parse_integer(const std::string& text, const std::string& key) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw Error("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
  if (text == "false" || text == "no" || text == "0" || text == "off") return false;
  throw Error("config key '" + key + "' expects true/false, got '" + text + "'");
}

std::array<double, 3> parse_triple(const std::string& text, const std::string& key) {
  const auto items = split_list(text);
  if (items.size() != 3) throw Error("config key '" + key + "' expects three comma-separated values");
  return {parse_real(items[0], key), parse_real(items[1], key), parse_real(items[2], key)};
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
  return s;
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

}  // namespace

void EvalConfig::validate() const {
  if (model_name.empty()) throw Error("model_name must not be empty");
  if (threads == 0) throw Error("threads must be >= 1");
  if (shape.voxels() == 0) throw Error("geometry shape must be positive");
  for (double s : spacing)
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("geometry spacing must be positive");
  if (!(intensity_tolerance >= 0.0)) throw Error("intensity_tolerance must be >= 0");
  KernelSpec::parse(feature_kernel).validate();
  KernelSpec::parse(image_kernel).validate();
  ms_ssim_spec.validate();
  if (ms_ssim && ms_ssim_pairs == 0) throw Error("ms_ssim_pairs must be >= 1");
  GateConfig g{qc_threshold.value_or(0.5), target_real_fail_fraction, min_model_pass_rate, qc_regions};
  g.validate();
  if (!(grid_step > 0.0 && grid_step < 1.0)) throw Error("grid_step must lie in (0, 1)");
  if (icv_fit != "real" && icv_fit != "pooled") throw Error("icv_fit must be 'real' or 'pooled'");
  if (!(flag_threshold >= 0.0)) throw Error("flag_threshold must be >= 0");
  if (phantom.count == 0) throw Error("phantom count must be >= 1");
  if (phantom.qc_fail > phantom.count) throw Error("phantom qc_fail exceeds count");
}

EvalConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }

  EvalConfig c;
  bool weights_given = false;
  for (const auto& [section, body] : tree) {
    const auto known = known_keys().find(section);
    if (known == known_keys().end()) {
      if (!body.empty() || body.data().empty()) throw Error("config: unknown section [" + section + "]");
      throw Error("config: key '" + section + "' outside a section");
    }
    for (const auto& [key, node] : body) {
      if (!known->second.count(key)) throw Error("config: unknown key '" + key + "' in [" + section + "]");
      const std::string v = trim(node.data());
      const std::string name = section + "." + key;
      if (section == "evaluation") {
        if (key == "model_name") c.model_name = v;
        else if (key == "seed") c.seed = parse_integer<std::uint64_t>(v, name);
        else c.threads = parse_integer<unsigned>(v, name);
      } else if (section == "inputs") {
        if (key == "real") c.real_dir = resolve(v, base_dir);
        else if (key == "synth") c.synth_dir = resolve(v, base_dir);
        else c.region_table = v.empty() ? std::filesystem::path() : resolve(v, base_dir);
      } else if (section == "geometry") {
        if (key == "shape") {
          const auto items = split_list(v);
          if (items.size() != 3) throw Error("config key '" + name + "' expects three comma-separated values");
          c.shape = {parse_integer<std::size_t>(items[0], name), parse_integer<std::size_t>(items[1], name),
                     parse_integer<std::size_t>(items[2], name)};
        } else if (key == "spacing") {
          c.spacing = parse_triple(v, name);
        } else {
          c.intensity_tolerance = parse_real(v, name);
        }
      } else if (section == "metrics") {
        if (key == "embedding_tags") c.embedding_tags = split_list(v);
        else if (key == "feature_kernel") c.feature_kernel = v;
        else if (key == "image_kernel") c.image_kernel = v;
        else if (key == "image_mmd") c.image_mmd = parse_bool(v, name);
        else if (key == "ms_ssim") c.ms_ssim = parse_bool(v, name);
        else if (key == "ms_ssim_pairs") c.ms_ssim_pairs = parse_integer<std::size_t>(v, name);
        else if (key == "ms_ssim_scales") c.ms_ssim_spec.scales = parse_integer<int>(v, name);
        else if (key == "ms_ssim_window") c.ms_ssim_spec.window = parse_integer<int>(v, name);
        else if (key == "ms_ssim_sigma") c.ms_ssim_spec.sigma = parse_real(v, name);
        else {
          c.ms_ssim_spec.weights.clear();
          for (const auto& w : split_list(v)) c.ms_ssim_spec.weights.push_back(parse_real(w, name));
          weights_given = true;
        }
      } else if (section == "qc") {
        if (key == "threshold") {
          if (!v.empty() && v != "calibrate") c.qc_threshold = parse_real(v, name);
        } else if (key == "target_real_fail_fraction") {
          c.target_real_fail_fraction = parse_real(v, name);
        } else if (key == "grid_step") {
          c.grid_step = parse_real(v, name);
        } else if (key == "min_model_pass_rate") {
          c.min_model_pass_rate = parse_real(v, name);
        } else {
          c.qc_regions = split_list(v);
        }
      } else if (section == "anatomy") {
        if (key == "icv_fit") c.icv_fit = v;
        else c.flag_threshold = parse_real(v, name);
      } else {
        auto& p = c.phantom;
        if (key == "count") p.count = parse_integer<std::size_t>(v, name);
        else if (key == "region_jitter") p.region_jitter = parse_real(v, name);
        else if (key == "global_jitter") p.global_jitter = parse_real(v, name);
        else if (key == "stratified") p.stratified = parse_bool(v, name);
        else if (key == "noise_sigma") p.noise_sigma = parse_real(v, name);
        else if (key == "qc_fail") p.qc_fail = parse_integer<std::size_t>(v, name);
        else if (key == "embedding_dim") p.embedding_dim = parse_integer<std::size_t>(v, name);
        else {
          for (const auto& item : split_list(v)) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw Error("config key '" + name + "' expects key=factor items");
            p.region_scale[trim(item.substr(0, eq))] = parse_real(trim(item.substr(eq + 1)), name);
          }
        }
      }
    }
  }

  // A shorter pyramid without explicit weights keeps the leading default
  // weights, renormalized.
  if (!weights_given && c.ms_ssim_spec.scales > 0 &&
      static_cast<std::size_t>(c.ms_ssim_spec.scales) != c.ms_ssim_spec.weights.size()) {
    const MsSsimSpec defaults;
    if (static_cast<std::size_t>(c.ms_ssim_spec.scales) > defaults.weights.size())
      throw Error("ms_ssim_scales above 5 needs explicit ms_ssim_weights");
    std::vector<double> w(defaults.weights.begin(), defaults.weights.begin() + c.ms_ssim_spec.scales);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;
    c.ms_ssim_spec.weights = std::move(w);
  }
  c.validate();
  return c;
}

EvalConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      path.parent_path());
}

std::string canonical_config(const EvalConfig& c) {
  std::ostringstream s;
  auto reals = [](const auto& xs) {
    std::vector<std::string> out;
    for (double x : xs) out.push_back(format_real(x));
    return join(out);
  };
  s << "[evaluation]\nmodel_name=" << c.model_name << "\nseed=" << c.seed << "\n";
  s << "[inputs]\nreal=" << c.real_dir.generic_string() << "\nsynth=" << c.synth_dir.generic_string()
    << "\nregion_table=" << c.region_table.generic_string() << "\n";
  s << "[geometry]\nshape=" << c.shape.nx << "," << c.shape.ny << "," << c.shape.nz
    << "\nspacing=" << reals(c.spacing) << "\nintensity_tolerance=" << format_real(c.intensity_tolerance) << "\n";
  s << "[metrics]\nembedding_tags=" << join(c.embedding_tags) << "\nfeature_kernel=" << c.feature_kernel
    << "\nimage_kernel=" << c.image_kernel << "\nimage_mmd=" << c.image_mmd << "\nms_ssim=" << c.ms_ssim
    << "\nms_ssim_pairs=" << c.ms_ssim_pairs << "\nms_ssim_scales=" << c.ms_ssim_spec.scales
    << "\nms_ssim_window=" << c.ms_ssim_spec.window << "\nms_ssim_sigma=" << format_real(c.ms_ssim_spec.sigma)
    << "\nms_ssim_weights=" << reals(c.ms_ssim_spec.weights) << "\n";
  s << "[qc]\nthreshold=" << (c.qc_threshold ? format_real(*c.qc_threshold) : "calibrate")
    << "\ntarget_real_fail_fraction=" << format_real(c.target_real_fail_fraction)
    << "\ngrid_step=" << format_real(c.grid_step) << "\nmin_model_pass_rate=" << format_real(c.min_model_pass_rate)
    << "\nregions=" << join(c.qc_regions) << "\n";
  s << "[anatomy]\nicv_fit=" << c.icv_fit << "\nflag_threshold=" << format_real(c.flag_threshold) << "\n";
  return s.str();
}

}  // namespace mrieval
