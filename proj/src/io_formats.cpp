#include "szc/io_formats.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace szc {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << text;
}

namespace {

const json& require_field(const json& j, const char* field, const char* what) {
  if (!j.contains(field))
    throw std::domain_error(std::string(what) + ": missing field \"" + field + "\"");
  return j.at(field);
}

double require_number(const json& j, const char* field, const char* what) {
  const json& v = require_field(j, field, what);
  if (!v.is_number())
    throw std::domain_error(std::string(what) + ": field \"" + field + "\" is not a number");
  return v.get<double>();
}

}  // namespace

std::string protocol_to_json(const Protocol& protocol) {
  json j;
  j["T"] = protocol.duration;
  json knots = json::array();
  for (std::size_t i = 0; i < protocol.knot_t.size(); ++i)
    knots.push_back({{"t", protocol.knot_t[i]}, {"alpha", protocol.knot_alpha[i]}});
  j["knots"] = std::move(knots);
  j["alpha_unit"] = "E0L";
  j["interpolation"] = "natural-cubic";
  return j.dump(2) + "\n";
}

Protocol protocol_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::domain_error(std::string("protocol JSON: ") + e.what());
  }
  const char* what = "protocol JSON";
  const double duration = require_number(j, "T", what);
  const json& knots = require_field(j, "knots", what);
  if (!knots.is_array() || knots.size() < 2)
    throw std::domain_error("protocol JSON: field \"knots\" must be an array of at least 2");
  if (j.contains("alpha_unit") && j.at("alpha_unit") != "E0L")
    throw std::domain_error("protocol JSON: field \"alpha_unit\" must be \"E0L\"");
  if (j.contains("interpolation") && j.at("interpolation") != "natural-cubic")
    throw std::domain_error("protocol JSON: field \"interpolation\" must be \"natural-cubic\"");
  std::vector<double> t, a;
  t.reserve(knots.size());
  a.reserve(knots.size());
  for (const json& knot : knots) {
    t.push_back(require_number(knot, "t", "protocol JSON knot"));
    a.push_back(require_number(knot, "alpha", "protocol JSON knot"));
  }
  if (t.back() != duration)
    throw std::domain_error("protocol JSON: field \"T\" disagrees with the last knot time");
  return Protocol::from_knots(std::move(t), std::move(a));
}

void save_protocol(const Protocol& protocol, const std::filesystem::path& path) {
  write_text_file(path, protocol_to_json(protocol));
}

Protocol load_protocol(const std::filesystem::path& path) {
  return protocol_from_json(read_text_file(path));
}

std::string network_to_json(const DenseNet& net, const AdamState* adam) {
  json j;
  j["arch"] = net.architecture();
  j["activation"] = "relu";
  json layers = json::array();
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    json w = json::array();
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) row.push_back(net.weights[l](r, c));
      w.push_back(std::move(row));
    }
    json b = json::array();
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) b.push_back(net.biases[l][i]);
    layers.push_back({{"w", std::move(w)}, {"b", std::move(b)}});
  }
  j["layers"] = std::move(layers);
  j["output"] = {{"type", net.output_activation == OutputActivation::kTanhScaled ? "tanh_scaled"
                                                                                 : "linear"},
                 {"scale", net.output_scale}};
  if (adam) {
    json a;
    a["step"] = adam->step;
    a["learning_rate"] = adam->learning_rate;
    a["beta1"] = adam->beta1;
    a["beta2"] = adam->beta2;
    a["epsilon"] = adam->epsilon;
    auto dump_mats = [](const std::vector<Eigen::MatrixXd>& ms) {
      json out = json::array();
      for (const auto& m : ms) {
        json mat = json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          json row = json::array();
          for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
          mat.push_back(std::move(row));
        }
        out.push_back(std::move(mat));
      }
      return out;
    };
    auto dump_vecs = [](const std::vector<Eigen::VectorXd>& vs) {
      json out = json::array();
      for (const auto& v : vs) {
        json vec = json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i) vec.push_back(v[i]);
        out.push_back(std::move(vec));
      }
      return out;
    };
    a["m_w"] = dump_mats(adam->m_w);
    a["v_w"] = dump_mats(adam->v_w);
    a["m_b"] = dump_vecs(adam->m_b);
    a["v_b"] = dump_vecs(adam->v_b);
    j["adam"] = std::move(a);
  }
  return j.dump(2) + "\n";
}

DenseNet network_from_json(const std::string& text, AdamState* adam) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::domain_error(std::string("weights JSON: ") + e.what());
  }
  const char* what = "weights JSON";
  const json& arch = require_field(j, "arch", what);
  const json& layers = require_field(j, "layers", what);
  if (!layers.is_array() || layers.size() + 1 != arch.size())
    throw std::domain_error("weights JSON: \"layers\" does not match \"arch\"");

  DenseNet net;
  if (j.contains("output")) {
    const json& out = j.at("output");
    const std::string type = require_field(out, "type", what).get<std::string>();
    if (type == "tanh_scaled")
      net.output_activation = OutputActivation::kTanhScaled;
    else if (type == "linear")
      net.output_activation = OutputActivation::kLinear;
    else
      throw std::domain_error("weights JSON: unknown output type \"" + type + "\"");
    net.output_scale = require_number(out, "scale", what);
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int fan_in = arch.at(l).get<int>();
    const int fan_out = arch.at(l + 1).get<int>();
    const json& w = require_field(layers.at(l), "w", what);
    const json& b = require_field(layers.at(l), "b", what);
    if (static_cast<int>(w.size()) != fan_out)
      throw std::domain_error("weights JSON: layer weight row count mismatch");
    Eigen::MatrixXd wm(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      if (static_cast<int>(w.at(r).size()) != fan_in)
        throw std::domain_error("weights JSON: layer weight column count mismatch");
      for (int c = 0; c < fan_in; ++c) wm(r, c) = w.at(r).at(c).get<double>();
    }
    Eigen::VectorXd bv(fan_out);
    if (static_cast<int>(b.size()) != fan_out)
      throw std::domain_error("weights JSON: layer bias size mismatch");
    for (int i = 0; i < fan_out; ++i) bv[i] = b.at(i).get<double>();
    net.weights.push_back(std::move(wm));
    net.biases.push_back(std::move(bv));
  }

  if (adam) {
    *adam = AdamState::like(net);
    if (j.contains("adam")) {
      const json& a = j.at("adam");
      adam->step = a.value("step", 0L);
      adam->learning_rate = a.value("learning_rate", adam->learning_rate);
      adam->beta1 = a.value("beta1", adam->beta1);
      adam->beta2 = a.value("beta2", adam->beta2);
      adam->epsilon = a.value("epsilon", adam->epsilon);
      auto load_mats = [&](const char* key, std::vector<Eigen::MatrixXd>& ms) {
        if (!a.contains(key)) return;
        const json& arr = a.at(key);
        for (std::size_t l = 0; l < ms.size() && l < arr.size(); ++l)
          for (Eigen::Index r = 0; r < ms[l].rows(); ++r)
            for (Eigen::Index c = 0; c < ms[l].cols(); ++c)
              ms[l](r, c) = arr.at(l).at(r).at(c).get<double>();
      };
      auto load_vecs = [&](const char* key, std::vector<Eigen::VectorXd>& vs) {
        if (!a.contains(key)) return;
        const json& arr = a.at(key);
        for (std::size_t l = 0; l < vs.size() && l < arr.size(); ++l)
          for (Eigen::Index i = 0; i < vs[l].size(); ++i)
            vs[l][i] = arr.at(l).at(i).get<double>();
      };
      load_mats("m_w", adam->m_w);
      load_mats("v_w", adam->v_w);
      load_vecs("m_b", adam->m_b);
      load_vecs("v_b", adam->v_b);
    }
  }
  return net;
}

void save_network(const DenseNet& net, const std::filesystem::path& path, const AdamState* adam) {
  write_text_file(path, network_to_json(net, adam));
}

DenseNet load_network(const std::filesystem::path& path, AdamState* adam) {
  return network_from_json(read_text_file(path), adam);
}

std::string spectrum_csv(const Spectrum& spectrum) {
  std::string out = "n,E_n,k_n\n";
  for (const EigenLevel& lvl : spectrum.levels) {
    out += std::to_string(lvl.index);
    out += ',';
    out += format_double(lvl.energy);
    out += ',';
    out += format_double(lvl.k);
    out += '\n';
  }
  return out;
}

std::string trajectory_csv(const std::vector<AmplitudeState>& trajectory) {
  if (trajectory.empty()) return "t,alpha\n";
  const Eigen::Index n = trajectory.front().amplitudes.size();
  std::string out = "t,alpha";
  for (Eigen::Index i = 1; i <= n; ++i) out += ",occ_" + std::to_string(i);
  out += '\n';
  for (const AmplitudeState& s : trajectory) {
    out += format_double(s.t);
    out += ',';
    out += format_double(s.alpha);
    const Eigen::VectorXd occ = occupations(s);
    for (Eigen::Index i = 0; i < n; ++i) {
      out += ',';
      out += format_double(occ[i]);
    }
    out += '\n';
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "d,occ1_T,occ2_T,occ_higher_T\n";
  for (const SweepRow& row : rows) {
    out += format_double(row.d);
    out += ',';
    out += format_double(row.occ1);
    out += ',';
    out += format_double(row.occ2);
    out += ',';
    out += format_double(row.occ_higher);
    out += '\n';
  }
  return out;
}

std::string reward_history_csv(const std::vector<EpisodeStat>& history) {
  std::string out = "episode,cumulative_reward,epsilon_or_sigma\n";
  for (const EpisodeStat& s : history) {
    out += std::to_string(s.episode);
    out += ',';
    out += format_double(s.cumulative_reward);
    out += ',';
    out += format_double(s.exploration);
    out += '\n';
  }
  return out;
}

}  // namespace szc
