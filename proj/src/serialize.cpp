#include "instashap/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <sodium.h>

#include "json.hpp"

namespace instashap {

using nlohmann::json;

namespace {

constexpr const char* kFormatTag = "instashap-model";

void EnsureSodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw NumericalError("libsodium failed to initialize");
}

std::string ChecksumHex(const std::string& text) {
  EnsureSodium();
  unsigned char digest[32];
  crypto_generichash(digest, sizeof digest, reinterpret_cast<const unsigned char*>(text.data()),
                     text.size(), nullptr, 0);
  std::ostringstream os;
  for (unsigned char b : digest) os << std::hex << std::setw(2) << std::setfill('0') << int(b);
  return os.str();
}

[[noreturn]] void Corrupt(const std::string& what) {
  throw CorruptModelError("corrupt model file: " + what);
}

template <class T>
T Field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) Corrupt(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    Corrupt(std::string("field '") + key + "' has the wrong type");
  }
}

const json& Object(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) Corrupt(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::vector<double> Doubles(const json& j, const char* key) {
  return Base64DecodeDoubles(Field<std::string>(j, key));
}

json FeaturesToJson(const std::vector<FeatureInfo>& features) {
  json out = json::array();
  for (const auto& f : features) {
    out.push_back({{"name", f.name},
                   {"kind", f.kind == FeatureKind::kCategorical ? "categorical" : "continuous"},
                   {"levels", f.levels}});
  }
  return out;
}

std::vector<FeatureInfo> FeaturesFromJson(const json& j) {
  if (!j.is_array()) Corrupt("features must be an array");
  std::vector<FeatureInfo> out;
  for (const auto& e : j) {
    FeatureInfo f;
    f.name = Field<std::string>(e, "name");
    const auto kind = Field<std::string>(e, "kind");
    if (kind == "categorical") {
      f.kind = FeatureKind::kCategorical;
    } else if (kind != "continuous") {
      Corrupt("unknown feature kind '" + kind + "'");
    }
    f.levels = Field<std::vector<std::string>>(e, "levels");
    out.push_back(std::move(f));
  }
  return out;
}

std::string TaskName(Task t) {
  return t == Task::kClassification ? "classification" : "regression";
}

Task TaskFromName(const std::string& s) {
  if (s == "classification") return Task::kClassification;
  if (s == "regression") return Task::kRegression;
  Corrupt("unknown task '" + s + "'");
}

json EncoderToJson(const FeatureEncoder& e) {
  return {{"features", FeaturesToJson(e.features())},
          {"means", Base64EncodeDoubles(e.means())},
          {"scales", Base64EncodeDoubles(e.scales())}};
}

FeatureEncoder EncoderFromJson(const json& j) {
  try {
    return FeatureEncoder::FromParts(FeaturesFromJson(Object(j, "features")),
                                     Doubles(j, "means"), Doubles(j, "scales"));
  } catch (const InvalidArgument& e) {
    Corrupt(std::string("encoder: ") + e.what());
  }
}

json MlpToJson(const Mlp& net) {
  const auto p = net.params();
  return {{"input_dim", net.spec().input_dim},
          {"hidden", net.spec().hidden},
          {"output_dim", net.spec().output_dim},
          {"params", Base64EncodeDoubles(std::vector<double>(p.begin(), p.end()))}};
}

Mlp MlpFromJson(const json& j) {
  MlpSpec spec;
  spec.input_dim = Field<int>(j, "input_dim");
  spec.hidden = Field<std::vector<int>>(j, "hidden");
  spec.output_dim = Field<int>(j, "output_dim");
  const auto params = Doubles(j, "params");
  try {
    Mlp net(spec, 0);
    if (net.num_params() != params.size()) Corrupt("network parameter count mismatch");
    net.SetParams(params);
    return net;
  } catch (const InvalidArgument& e) {
    Corrupt(std::string("network: ") + e.what());
  }
}

std::string Wrap(ModelKind kind, json payload, const std::map<std::string, std::string>& metadata) {
  const std::string body = payload.dump();
  json c = {{"format", kFormatTag},
            {"format_version", kModelFormatVersion},
            {"kind", ToString(kind)},
            {"metadata", metadata},
            {"checksum", "blake2b-256:" + ChecksumHex(body)},
            {"payload", std::move(payload)}};
  return c.dump(1) + "\n";
}

json Parse(const std::string& bytes) {
  json c;
  try {
    c = json::parse(bytes);
  } catch (const json::parse_error& e) {
    Corrupt(std::string("not valid JSON (") + e.what() + ")");
  }
  if (!c.is_object() || c.value("format", "") != kFormatTag) Corrupt("not an instashap model");
  const int version = Field<int>(c, "format_version");
  if (version != kModelFormatVersion) {
    throw ModelVersionError("model format version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kModelFormatVersion) + ")");
  }
  const json& payload = Object(c, "payload");
  const auto sum = Field<std::string>(c, "checksum");
  if (sum != "blake2b-256:" + ChecksumHex(payload.dump())) Corrupt("checksum mismatch");
  return c;
}

json Unwrap(const std::string& bytes, ModelKind expected) {
  json c = Parse(bytes);
  const auto kind = Field<std::string>(c, "kind");
  if (kind != ToString(expected)) {
    throw InvalidArgument("model file holds a " + kind + ", expected a " + ToString(expected));
  }
  return c.at("payload");
}

}  // namespace

std::string ToString(ModelKind kind) {
  switch (kind) {
    case ModelKind::kAdditive: return "additive_model";
    case ModelKind::kSurrogate: return "surrogate";
    case ModelKind::kAmortizedHead: return "amortized_head";
  }
  return "unknown";
}

std::string Base64EncodeDoubles(const std::vector<double>& values) {
  EnsureSodium();
  std::string raw(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) raw[i * 8 + b] = static_cast<char>((u >> (8 * b)) & 0xFFu);
  }
  const int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(raw.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(raw.data()),
                    raw.size(), variant);
  out.resize(std::char_traits<char>::length(out.c_str()));
  return out;
}

std::vector<double> Base64DecodeDoubles(const std::string& text) {
  EnsureSodium();
  std::string raw(text.size() / 4 * 3 + 3, '\0');
  std::size_t len = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(raw.data()), raw.size(), text.data(),
                        text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      len % 8 != 0) {
    Corrupt("invalid base64 float array");
  }
  std::vector<double> out(len / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) {
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i * 8 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<double>(u);
  }
  return out;
}

std::string SerializeModel(const AdditiveModel& model) {
  json shapes = json::array();
  for (const auto& s : model.shapes()) {
    json axes = json::array();
    for (const auto& a : s.axes()) {
      axes.push_back({{"feature", a.feature},
                      {"kind", a.kind == FeatureKind::kCategorical ? "categorical" : "continuous"},
                      {"knots", Base64EncodeDoubles(a.knots)},
                      {"levels", a.levels}});
    }
    shapes.push_back({{"subset", s.subset().bits()},
                      {"axes", std::move(axes)},
                      {"coefficients", Base64EncodeDoubles(s.coefficients())}});
  }
  std::vector<std::uint32_t> frontier;
  for (FeatureSet t : model.frontier()) frontier.push_back(t.bits());
  json payload = {{"d", model.num_features()},
                  {"c", model.output_dim()},
                  {"objective", ToString(model.objective())},
                  {"task", TaskName(model.task)},
                  {"class_names", model.class_names},
                  {"features", FeaturesToJson(model.features)},
                  {"intercept", Base64EncodeDoubles(model.intercept())},
                  {"frontier", frontier},
                  {"shapes", std::move(shapes)}};
  return Wrap(ModelKind::kAdditive, std::move(payload), model.metadata);
}

AdditiveModel DeserializeAdditiveModel(const std::string& bytes) {
  const json c = Parse(bytes);
  if (Field<std::string>(c, "kind") != ToString(ModelKind::kAdditive)) {
    throw InvalidArgument("model file does not hold an additive model");
  }
  const json& p = c.at("payload");
  const int d = Field<int>(p, "d");
  const int out_dim = Field<int>(p, "c");
  std::vector<ShapeFunction> shapes;
  const json& js = Object(p, "shapes");
  if (!js.is_array()) Corrupt("shapes must be an array");
  try {
    for (const auto& e : js) {
      std::vector<AxisBasis> axes;
      const json& ja = Object(e, "axes");
      if (!ja.is_array()) Corrupt("axes must be an array");
      for (const auto& a : ja) {
        AxisBasis b;
        b.feature = Field<int>(a, "feature");
        b.kind = Field<std::string>(a, "kind") == "categorical" ? FeatureKind::kCategorical
                                                                 : FeatureKind::kContinuous;
        b.knots = Doubles(a, "knots");
        b.levels = Field<int>(a, "levels");
        axes.push_back(std::move(b));
      }
      ShapeFunction s(FeatureSet(Field<std::uint32_t>(e, "subset")), std::move(axes), out_dim);
      auto coef = Doubles(e, "coefficients");
      if (coef.size() != s.coefficients().size()) Corrupt("coefficient count mismatch");
      s.coefficients() = std::move(coef);
      shapes.push_back(std::move(s));
    }
    AdditiveModel m(d, Doubles(p, "intercept"), std::move(shapes),
                    ParseTrainingObjective(Field<std::string>(p, "objective")));
    if (m.output_dim() != out_dim) Corrupt("intercept width mismatch");
    std::vector<std::uint32_t> frontier;
    for (FeatureSet t : m.frontier()) frontier.push_back(t.bits());
    if (frontier != Field<std::vector<std::uint32_t>>(p, "frontier")) Corrupt("frontier mismatch");
    m.task = TaskFromName(Field<std::string>(p, "task"));
    m.class_names = Field<std::vector<std::string>>(p, "class_names");
    m.features = FeaturesFromJson(Object(p, "features"));
    m.metadata = Field<std::map<std::string, std::string>>(c, "metadata");
    return m;
  } catch (const InvalidArgument& e) {
    Corrupt(e.what());
  }
}

std::string SerializeModel(const SurrogateModel& model,
                           const std::map<std::string, std::string>& metadata) {
  if (!model.trained()) throw InvalidArgument("cannot serialize an untrained surrogate");
  json payload = {{"task", TaskName(model.task())},
                  {"c", model.output_dim()},
                  {"target_scaling", Base64EncodeDoubles({model.y_mean(), model.y_scale()})},
                  {"encoder", EncoderToJson(model.encoder())},
                  {"network", MlpToJson(model.net())}};
  return Wrap(ModelKind::kSurrogate, std::move(payload), metadata);
}

SurrogateModel DeserializeSurrogate(const std::string& bytes) {
  const json p = Unwrap(bytes, ModelKind::kSurrogate);
  const auto scaling = Doubles(p, "target_scaling");
  if (scaling.size() != 2) Corrupt("target scaling must hold two values");
  try {
    return SurrogateModel::Restore(EncoderFromJson(Object(p, "encoder")),
                                   MlpFromJson(Object(p, "network")),
                                   TaskFromName(Field<std::string>(p, "task")), Field<int>(p, "c"),
                                   scaling[0], scaling[1]);
  } catch (const InvalidArgument& e) {
    Corrupt(e.what());
  }
}

std::string SerializeModel(const AmortizedHead& head,
                           const std::map<std::string, std::string>& metadata) {
  json payload = {{"d", head.num_features()},
                  {"c", head.output_dim()},
                  {"k", head.order()},
                  {"scale", Base64EncodeDoubles({head.scale()})},
                  {"constant_head", head.constant_head()},
                  {"encoder", EncoderToJson(head.encoder())},
                  {"network", MlpToJson(head.net())}};
  return Wrap(ModelKind::kAmortizedHead, std::move(payload), metadata);
}

AmortizedHead DeserializeAmortizedHead(const std::string& bytes) {
  const json p = Unwrap(bytes, ModelKind::kAmortizedHead);
  const auto scale = Doubles(p, "scale");
  if (scale.size() != 1) Corrupt("head scale must hold one value");
  try {
    return AmortizedHead(Field<int>(p, "d"), Field<int>(p, "c"), Field<int>(p, "k"),
                         EncoderFromJson(Object(p, "encoder")), MlpFromJson(Object(p, "network")),
                         scale[0], Field<bool>(p, "constant_head"));
  } catch (const InvalidArgument& e) {
    Corrupt(e.what());
  }
}

ModelKind PeekModelKind(const std::string& bytes) {
  const auto kind = Field<std::string>(Parse(bytes), "kind");
  for (ModelKind k : {ModelKind::kAdditive, ModelKind::kSurrogate, ModelKind::kAmortizedHead}) {
    if (kind == ToString(k)) return k;
  }
  Corrupt("unknown model kind '" + kind + "'");
}

std::map<std::string, std::string> ModelMetadata(const std::string& bytes) {
  return Field<std::map<std::string, std::string>>(Parse(bytes), "metadata");
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void WriteFileBytes(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + path + "'");
    out << bytes;
    if (!out.flush()) throw InvalidArgument("failed writing '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw InvalidArgument("cannot move model into '" + path + "'");
  }
}

void WriteShapeCsv(const AdditiveModel& model, const ShapeFunction& shape,
                   const std::string& path,
                   const std::vector<std::vector<double>>& axis_grids) {
  const auto& axes = shape.axes();
  if (!axis_grids.empty() && axis_grids.size() != axes.size()) {
    throw InvalidArgument("one grid per shape axis is required");
  }
  std::vector<std::vector<double>> grids(axes.size());
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (!axis_grids.empty() && !axis_grids[a].empty()) {
      grids[a] = axis_grids[a];
    } else if (axes[a].kind == FeatureKind::kCategorical) {
      for (int l = 0; l < axes[a].levels; ++l) grids[a].push_back(l);
    } else {
      grids[a] = axes[a].knots;
    }
  }
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << std::setprecision(17);
  auto feature_name = [&](int f) {
    return f < static_cast<int>(model.features.size()) && !model.features[f].name.empty()
               ? model.features[f].name
               : "x" + std::to_string(f + 1);
  };
  for (const auto& a : axes) out << feature_name(a.feature) << ",";
  const int c = shape.output_dim();
  for (int o = 0; o < c; ++o) {
    if (o) out << ",";
    if (c == 1) {
      out << "value";
    } else if (o < static_cast<int>(model.class_names.size())) {
      out << "value_" << model.class_names[o];
    } else {
      out << "value_" << o;
    }
  }
  out << "\n";
  std::vector<double> x(static_cast<std::size_t>(model.num_features()), 0.0);
  std::vector<std::size_t> pick(axes.size(), 0);
  while (true) {
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double v = grids[a][pick[a]];
      x[axes[a].feature] = v;
      const auto& info = axes[a].feature < static_cast<int>(model.features.size())
                             ? model.features[axes[a].feature]
                             : FeatureInfo{};
      const int level = static_cast<int>(v);
      if (axes[a].kind == FeatureKind::kCategorical && level >= 0 && level < info.num_levels()) {
        out << info.levels[level] << ",";
      } else {
        out << v << ",";
      }
    }
    const auto val = shape(x);
    for (int o = 0; o < c; ++o) out << (o ? "," : "") << val[o];
    out << "\n";
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++pick[a] < grids[a].size()) break;
      pick[a] = 0;
      if (a == 0) {
        a = axes.size() + 1;
        break;
      }
    }
    if (a == axes.size() + 1 || axes.empty()) break;
  }
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

}  // namespace instashap
