#ifndef LAST_SERIALIZE_HPP_
#define LAST_SERIALIZE_HPP_

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "last/types.hpp"

namespace last {

//! On-disk model, either a single binary classifier or a one-vs-all set.
struct StoredModel {
  enum class Kind { binary, multiclass };
  Kind kind = Kind::binary;
  MulticlassModel model;  // binary models are stored as a single member

  const DictionaryModel& binary() const {
    if (kind != Kind::binary || model.models.size() != 1) {
      throw std::logic_error("StoredModel: not a binary model");
    }
    return model.models.front();
  }
};

namespace detail {

inline nlohmann::json model_to_json(const DictionaryModel& m, int label) {
  nlohmann::json j;
  j["label"] = label;
  j["bias"] = 0.0;  // reserved, always zero
  std::vector<double> d(static_cast<std::size_t>(m.D.size()));
  // Row-major: entry (r, c) at index r * cols + c.
  for (Eigen::Index r = 0; r < m.D.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.D.cols(); ++c) {
      d[static_cast<std::size_t>(r * m.D.cols() + c)] = m.D(r, c);
    }
  }
  j["D"] = d;
  j["w"] = std::vector<double>(m.w.data(), m.w.data() + m.w.size());
  return j;
}

inline DictionaryModel model_from_json(const nlohmann::json& j, Eigen::Index n, Eigen::Index N,
                                       double alpha, const std::string& path) {
  DictionaryModel m;
  m.alpha = alpha;
  const auto& d = j.at("D");
  const auto& w = j.at("w");
  if (static_cast<Eigen::Index>(d.size()) != n * N) {
    throw ParseError(path + ": class entry has " + std::to_string(d.size()) +
                     " dictionary values, expected " + std::to_string(n * N));
  }
  if (static_cast<Eigen::Index>(w.size()) != N) {
    throw ParseError(path + ": class entry has " + std::to_string(w.size()) +
                     " weights, expected " + std::to_string(N));
  }
  m.D.resize(n, N);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < N; ++c) {
      m.D(r, c) = d.at(static_cast<std::size_t>(r * N + c)).get<double>();
    }
  }
  m.w.resize(N);
  for (Eigen::Index k = 0; k < N; ++k) m.w[k] = w.at(static_cast<std::size_t>(k)).get<double>();
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const StoredModel& stored) {
  stored.model.validate();
  const auto& members = stored.model.models;
  double alpha = members.front().alpha;
  for (const auto& m : members) {
    if (m.alpha != alpha) {
      throw std::invalid_argument("save_model: members disagree on alpha");
    }
  }
  if (stored.kind == StoredModel::Kind::binary && members.size() != 1) {
    throw std::invalid_argument("save_model: binary model must have exactly one member");
  }
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = stored.kind == StoredModel::Kind::binary ? "binary" : "multiclass";
  j["n"] = members.front().dim();
  j["N"] = members.front().atoms();
  j["alpha"] = alpha;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].atoms() != members.front().atoms()) {
      throw std::invalid_argument("save_model: members disagree on dictionary size");
    }
    classes.push_back(detail::model_to_json(members[c], stored.model.labels[c]));
  }
  j["classes"] = classes;
  return j;
}

inline StoredModel from_json(const nlohmann::json& j, const std::string& path) {
  try {
    int version = j.at("version").get<int>();
    if (version != 1) {
      throw ParseError(path + ": unsupported model version " + std::to_string(version));
    }
    std::string kind = j.at("kind").get<std::string>();
    if (kind != "binary" && kind != "multiclass") {
      throw ParseError(path + ": unknown model kind '" + kind + "'");
    }
    auto n = j.at("n").get<Eigen::Index>();
    auto N = j.at("N").get<Eigen::Index>();
    double alpha = j.at("alpha").get<double>();
    if (n < 1 || N < 1) throw ParseError(path + ": dimensions must be positive");
    StoredModel stored;
    stored.kind = kind == "binary" ? StoredModel::Kind::binary : StoredModel::Kind::multiclass;
    const auto& classes = j.at("classes");
    if (classes.empty()) throw ParseError(path + ": no class entries");
    if (stored.kind == StoredModel::Kind::binary && classes.size() != 1) {
      throw ParseError(path + ": binary model must have exactly one class entry");
    }
    for (const auto& entry : classes) {
      stored.model.models.push_back(detail::model_from_json(entry, n, N, alpha, path));
      stored.model.labels.push_back(entry.at("label").get<int>());
    }
    stored.model.validate();
    return stored;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_model(const StoredModel& stored, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot open " + path + " for writing");
  out << to_json(stored).dump(2) << '\n';
  if (!out) throw std::runtime_error("save_model: write to " + path + " failed");
}

inline void save_model(const DictionaryModel& model, const std::string& path, int label = 1) {
  StoredModel stored;
  stored.kind = StoredModel::Kind::binary;
  stored.model.models = {model};
  stored.model.labels = {label};
  save_model(stored, path);
}

inline void save_model(const MulticlassModel& model, const std::string& path) {
  StoredModel stored;
  stored.kind = StoredModel::Kind::multiclass;
  stored.model = model;
  save_model(stored, path);
}

inline StoredModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j, path);
}

}  // namespace last

#endif  // LAST_SERIALIZE_HPP_
