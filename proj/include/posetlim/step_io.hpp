#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "posetlim/step_function.hpp"

namespace posetlim {

// JSON layout: {"measures": [...], "values": [[...], ...]}. Entries are JSON
// numbers or strings holding an exact rational such as "1/3" or "0.25".

namespace detail {

inline std::optional<Rational> parse_rational(const std::string& text) {
  try {
    if (auto slash = text.find('/'); slash != std::string::npos) {
      BigInt num(text.substr(0, slash));
      BigInt den(text.substr(slash + 1));
      if (den == 0) return std::nullopt;
      return Rational(num, den);
    }
    if (auto dot = text.find('.'); dot != std::string::npos) {
      std::string digits = text.substr(0, dot) + text.substr(dot + 1);
      if (digits.empty() || digits == "-") return std::nullopt;
      BigInt den = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(text.size() - dot - 1));
      return Rational(BigInt(digits), den);
    }
    return Rational(BigInt(text));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline double entry_as_double(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    if (auto r = parse_rational(v.get<std::string>())) return to_double(*r);
  }
  throw ParseError("step function entry is neither a number nor a rational string");
}

inline std::optional<Rational> entry_as_rational(const nlohmann::json& v) {
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_string()) return parse_rational(v.get<std::string>());
  return std::nullopt;
}

inline void check_shape(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("measures") || !j.contains("values"))
    throw ParseError("step function JSON needs 'measures' and 'values'");
  const auto& m = j["measures"];
  const auto& v = j["values"];
  if (!m.is_array() || !v.is_array()) throw ParseError("'measures' and 'values' must be arrays");
  if (v.size() != m.size()) throw ParseError("'values' must have one row per part");
  for (const auto& row : v)
    if (!row.is_array() || row.size() != m.size()) throw ParseError("'values' must be a square matrix");
}

}  // namespace detail

inline StepFunction<double> step_function_from_json(const nlohmann::json& j) {
  detail::check_shape(j);
  std::vector<double> measures, values;
  for (const auto& x : j["measures"]) measures.push_back(detail::entry_as_double(x));
  for (const auto& row : j["values"])
    for (const auto& x : row) values.push_back(detail::entry_as_double(x));
  return StepFunction<double>(std::move(measures), std::move(values));
}

/// Exact reading; nullopt unless every entry is an integer or rational string.
inline std::optional<StepFunction<Rational>> exact_step_function_from_json(const nlohmann::json& j) {
  detail::check_shape(j);
  std::vector<Rational> measures, values;
  for (const auto& x : j["measures"]) {
    auto r = detail::entry_as_rational(x);
    if (!r) return std::nullopt;
    measures.push_back(*r);
  }
  for (const auto& row : j["values"])
    for (const auto& x : row) {
      auto r = detail::entry_as_rational(x);
      if (!r) return std::nullopt;
      values.push_back(*r);
    }
  return StepFunction<Rational>(std::move(measures), std::move(values));
}

template <class Scalar>
nlohmann::json to_json(const StepFunction<Scalar>& w) {
  auto entry = [](const Scalar& x) -> nlohmann::json {
    if constexpr (is_exact_v<Scalar>) {
      return x.str();
    } else {
      return x;
    }
  };
  nlohmann::json j;
  j["measures"] = nlohmann::json::array();
  for (const auto& m : w.measures()) j["measures"].push_back(entry(m));
  j["values"] = nlohmann::json::array();
  for (std::size_t i = 0; i < w.parts(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < w.parts(); ++c) row.push_back(entry(w.value(i, c)));
    j["values"].push_back(std::move(row));
  }
  return j;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline StepFunction<double> read_step_function_file(const std::string& path) {
  return step_function_from_json(read_json_file(path));
}

template <class Scalar>
void write_step_function_file(const std::string& path, const StepFunction<Scalar>& w) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << to_json(w).dump(2) << '\n';
}

}  // namespace posetlim
