#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "hetrel/error.hpp"
#include "hetrel/gsim.hpp"

namespace hetrel {

namespace {

constexpr std::string_view kMagic = "hetrel-model";
constexpr std::string_view kEndHeader = "end-header";
constexpr std::string_view kTrailer = "hetrel-model-end\n";

std::string format_double(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
}

template <typename T>
T read_le(std::istream& in, const std::string& what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) throw DataError("model file truncated in " + what);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void write_double(std::ostream& out, double x) { write_le(out, std::bit_cast<std::uint64_t>(x)); }

class HeaderReader {
 public:
  HeaderReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::vector<std::string> line(std::string_view expected_key) {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of header, expected '" + std::string(expected_key) + "'");
    ++line_;
    std::istringstream fields(text);
    std::vector<std::string> words;
    for (std::string w; fields >> w;) words.push_back(w);
    if (words.empty() || words[0] != expected_key) fail("expected '" + std::string(expected_key) + "'");
    return words;
  }

  std::string value(std::string_view key) {
    auto words = line(key);
    if (words.size() != 2) fail("malformed '" + std::string(key) + "' line");
    return words[1];
  }

  template <typename T>
  T number(std::string_view key) {
    return parse<T>(value(key), key);
  }

  template <typename T>
  T parse(const std::string& text, std::string_view what) {
    T out{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || end != text.data() + text.size())
      fail("bad value '" + text + "' for " + std::string(what));
    return out;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw DataError(path_ + ": header line " + std::to_string(line_) + ": " + message);
  }

 private:
  std::istream& in_;
  std::string path_;
  int line_ = 0;
};

}  // namespace

void save_model(const GsimModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  const auto& c = model.config;
  out << kMagic << '\n'
      << "version " << kModelFormatVersion << '\n'
      << "dim " << c.dim << '\n'
      << "max_length " << c.max_length << '\n'
      << "heads " << c.heads << '\n'
      << "node_dropout " << format_double(c.node_dropout) << '\n'
      << "lr " << format_double(c.lr) << '\n'
      << "max_epochs " << c.max_epochs << '\n'
      << "seed " << c.seed << '\n'
      << "weight_supervised " << format_double(c.weight_supervised) << '\n'
      << "weight_self " << format_double(c.weight_self) << '\n'
      << "supervised_loss " << to_string(c.supervised_loss) << '\n'
      << "learn_features " << (c.learn_features ? 1 : 0) << '\n'
      << "aggregation " << to_string(c.aggregation) << '\n'
      << "warmup_epochs " << c.warmup_epochs << '\n'
      << "patience " << c.patience << '\n'
      << "nodes " << model.num_nodes << '\n'
      << "types " << model.type_names.size() << '\n';
  for (const auto& t : model.type_names) out << "type " << t << '\n';
  out << "relations " << model.relations.size() << '\n';
  for (const auto& r : model.relations)
    out << "relation " << r.name << ' ' << r.src_type << ' ' << r.dst_type << ' '
        << (r.inverse_of ? std::to_string(*r.inverse_of) : std::string("-")) << '\n';
  const auto params = model.parameters();
  out << "arrays " << params.size() << '\n' << kEndHeader << '\n';

  for (const auto* p : params) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) write_double(out, p->value(i, j));
  }
  out << kTrailer;
  if (!out) throw DataError("failed writing model file " + path.string());
}

GsimModel load_model(const std::filesystem::path& path, const ModelExpectations& expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  HeaderReader h(in, path.string());

  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic) throw DataError(path.string() + ": not a model file");
  const auto version = h.number<int>("version");
  if (version != kModelFormatVersion)
    throw DataError(path.string() + ": model format version " + std::to_string(version) + ", expected " +
                    std::to_string(kModelFormatVersion));

  TrainConfig c;
  c.dim = h.number<int>("dim");
  c.max_length = h.number<int>("max_length");
  c.heads = h.number<int>("heads");
  c.node_dropout = h.number<double>("node_dropout");
  c.lr = h.number<double>("lr");
  c.max_epochs = h.number<int>("max_epochs");
  c.seed = h.number<std::uint64_t>("seed");
  c.weight_supervised = h.number<double>("weight_supervised");
  c.weight_self = h.number<double>("weight_self");
  try {
    c.supervised_loss = parse_supervised_loss(h.value("supervised_loss"));
    const auto learn = h.number<int>("learn_features");
    if (learn != 0 && learn != 1) throw ConfigError("learn_features must be 0 or 1");
    c.learn_features = learn == 1;
    c.aggregation = parse_aggregation(h.value("aggregation"));
    c.warmup_epochs = h.number<int>("warmup_epochs");
    c.patience = h.number<int>("patience");
    c.validate();
  } catch (const ConfigError& e) {
    h.fail(e.what());
  }

  auto mismatch = [&](std::string_view key, int stored, std::optional<int> wanted) {
    if (wanted && *wanted != stored)
      throw ConfigError(path.string() + ": model has " + std::string(key) + " = " + std::to_string(stored) +
                        " but " + std::to_string(*wanted) + " was requested");
  };
  mismatch("dim", c.dim, expect.dim);
  mismatch("max_length", c.max_length, expect.max_length);
  mismatch("heads", c.heads, expect.heads);

  const auto num_nodes = h.number<std::size_t>("nodes");
  const auto num_types = h.number<std::size_t>("types");
  std::vector<std::string> type_names;
  for (std::size_t t = 0; t < num_types; ++t) type_names.push_back(h.value("type"));
  const auto num_relations = h.number<std::size_t>("relations");
  std::vector<RelationInfo> relations;
  for (std::size_t r = 0; r < num_relations; ++r) {
    const auto words = h.line("relation");
    if (words.size() != 5) h.fail("malformed relation line");
    RelationInfo info{words[1], h.parse<TypeIndex>(words[2], "relation source"),
                      h.parse<TypeIndex>(words[3], "relation target"), std::nullopt};
    if (words[4] != "-") info.inverse_of = h.parse<RelationIndex>(words[4], "relation inverse");
    if (info.src_type < 0 || info.dst_type < 0 || static_cast<std::size_t>(info.src_type) >= num_types ||
        static_cast<std::size_t>(info.dst_type) >= num_types)
      h.fail("relation '" + info.name + "' refers to an unknown type");
    relations.push_back(std::move(info));
  }
  const auto num_arrays = h.number<std::size_t>("arrays");
  std::string end;
  if (!std::getline(in, end) || end != kEndHeader) h.fail("missing end-header");

  std::map<std::string, Matrix> arrays;
  for (std::size_t a = 0; a < num_arrays; ++a) {
    const auto name_length = read_le<std::uint32_t>(in, "array name length");
    if (name_length > 4096) throw DataError(path.string() + ": corrupt array name length");
    std::string name(name_length, '\0');
    if (!in.read(name.data(), name_length)) throw DataError(path.string() + ": model file truncated in array name");
    const auto rows = read_le<std::uint64_t>(in, name);
    const auto cols = read_le<std::uint64_t>(in, name);
    if (rows > (1u << 28) || cols > (1u << 28) || rows * cols > (1ull << 32))
      throw DataError(path.string() + ": corrupt shape for array '" + name + "'");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        m(i, j) = std::bit_cast<double>(read_le<std::uint64_t>(in, "array '" + name + "'"));
    arrays.emplace(std::move(name), std::move(m));
  }
  std::string trailer(kTrailer.size(), '\0');
  if (!in.read(trailer.data(), static_cast<std::streamsize>(trailer.size())) || trailer != kTrailer)
    throw DataError(path.string() + ": model file truncated (missing trailer)");

  auto model = init_model(c, num_nodes, std::move(type_names), std::move(relations));
  for (auto* p : model.parameters()) {
    const auto it = arrays.find(p->name);
    if (it == arrays.end()) throw DataError(path.string() + ": missing array '" + p->name + "'");
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw DataError(path.string() + ": array '" + p->name + "' has the wrong shape");
    if (!it->second.allFinite()) throw DataError(path.string() + ": array '" + p->name + "' holds non-finite values");
    p->value = it->second;
    p->zero_grad();
  }
  return model;
}

}  // namespace hetrel
