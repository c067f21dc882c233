#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "veriprobe/tensor_io.hpp"

using namespace veriprobe;

namespace {

ActivationSet random_set(std::uint64_t seed, int records) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 6);
  std::normal_distribution<float> n(0.0f, 1.0f);
  ActivationSet s;
  s.model_id = "m";
  s.layer_index = 7;
  for (int i = 0; i < records; ++i) {
    ActivationRecord r;
    r.statement_id = "s" + std::to_string(i);
    r.embeddings.resize(len(rng), 5);
    for (Eigen::Index a = 0; a < r.embeddings.rows(); ++a)
      for (Eigen::Index b = 0; b < 5; ++b) r.embeddings(a, b) = n(rng);
    s.records.push_back(std::move(r));
  }
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::input;
}

}  // namespace

TEST(TensorIo, SingleZeroRecord) {
  ActivationSet s;
  s.model_id = "zero";
  ActivationRecord r;
  r.statement_id = "a";
  r.embeddings = RowMatrixF::Zero(1, 4);
  s.records.push_back(r);
  const auto back = decode_activations(encode_activations(s));
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.records[0].embeddings.rows(), 1);
  EXPECT_EQ(back.records[0].embeddings.cols(), 4);
  EXPECT_TRUE((back.records[0].embeddings.array() == 0.0f).all());
}

TEST(TensorIo, HeaderLayout) {
  const auto bytes = encode_activations(random_set(1, 2));
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(bytes.substr(0, 8), std::string("VPACT\0\0\1", 8));
  const auto len = io_detail::load_u32_le(bytes.data() + 8);
  const auto header = nlohmann::json::parse(bytes.substr(12, len));
  EXPECT_EQ(header["dtype"], "f32");
  EXPECT_EQ(header["layer_index"], 7);
  EXPECT_EQ(header["records"].size(), 2u);
}

TEST(TensorIo, RoundTripIsByteIdentical) {
  const auto bytes = encode_activations(random_set(42, 5));
  EXPECT_EQ(encode_activations(decode_activations(bytes)), bytes);
  const auto path = std::filesystem::temp_directory_path() / "veriprobe_rt.vpa";
  io_detail::write_file_bytes(path, bytes);
  const auto set = read_activation_file(path);
  write_activation_file(path, set);
  EXPECT_EQ(io_detail::read_file_bytes(path), bytes);
  std::filesystem::remove(path);
}

TEST(TensorIo, ShortPayloadIsTruncation) {
  auto bytes = encode_activations(random_set(3, 2));
  bytes.resize(bytes.size() - 3);
  EXPECT_EQ(kind_of([&] { decode_activations(bytes); }), ErrorKind::truncation);
}

TEST(TensorIo, BadMagicIsFormat) {
  auto bytes = encode_activations(random_set(3, 1));
  bytes[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_activations(bytes); }), ErrorKind::format);
}

TEST(TensorIo, NanIsDataError) {
  auto s = random_set(4, 1);
  s.records[0].embeddings(0, 0) = std::numeric_limits<float>::quiet_NaN();
  const auto bytes = encode_activations(s);
  EXPECT_EQ(kind_of([&] { decode_activations(bytes); }), ErrorKind::data);
}

TEST(TensorIo, StatementParsesAndRejects) {
  const std::string line =
      R"({"statement_id":"a","text":"The city of Riga is located in Latvia.","pre_actualized_len":6,"label":"true","polarity":"affirmative","entity_ids":["riga"],"split":"train"})";
  const auto recs = parse_statements(line + "\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].label, Label::true_);
  EXPECT_EQ(recs[0].polarity, Polarity::affirmative);
  EXPECT_EQ(recs[0].split, Split::train);

  std::string bad = line;
  bad.replace(bad.find("\"true\""), 6, "\"unknown\"");
  EXPECT_EQ(kind_of([&] { parse_statements(bad); }), ErrorKind::schema);
  EXPECT_EQ(kind_of([&] { parse_statements(line + "\n" + line + "\n"); }), ErrorKind::duplication);
}

TEST(TensorIo, StatementRoundTrip) {
  const std::string text =
      R"({"statement_id":"a","text":"PR-104 is indicated for the treatment of tumors.","pre_actualized_len":7,"label":"neither","polarity":"negated","entity_ids":["x","y"],"split":"test"})"
      "\n";
  EXPECT_EQ(format_statements(parse_statements(text)), text);
}

TEST(TensorIo, Traces) {
  const std::string header(kTraceHeader);
  const auto ok = parse_traces(header + "\ns1,0.5,0.6,0.4,0.01,0.01,0.01\n");
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_DOUBLE_EQ(ok[0].p_plus, 0.6);
  EXPECT_EQ(kind_of([&] { parse_traces(header + "\ns1,0,0.6,0.4,0.01,0.01,0.01\n"); }), ErrorKind::range);
  EXPECT_EQ(kind_of([&] { parse_traces(header + "\ns1,0.5,1.5,0.4,0.01,0.01,0.01\n"); }), ErrorKind::range);

  const auto traces = fixture::planted_traces(9, 3, 0.8);
  const auto csv = format_traces(traces);
  EXPECT_EQ(parse_traces(csv), traces);
  EXPECT_EQ(format_traces(parse_traces(csv)), csv);
}
