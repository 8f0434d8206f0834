#include "pdiv/serialize.hpp"

#include "pdiv/error.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace pdiv {

namespace {

using Json = nlohmann::ordered_json;

Json matrix_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from(const Json& j, const std::string& what) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  require(rows >= 0 && cols >= 0 && data.is_array() && data.size() == static_cast<std::size_t>(rows * cols),
          ErrorCode::kParse, what + ": data length does not match rows × cols");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

Json parse_document(const std::string& text, const char* format) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("invalid ") + format + " document: " + e.what());
  }
  require(j.is_object() && j.value("format", "") == format, ErrorCode::kParse,
          std::string("document is not a ") + format + " file");
  return j;
}

}  // namespace

std::string pipeline_to_json(const ProjectionPipeline& p) {
  Json j;
  j["format"] = "pdiv-pipeline";
  j["d_p"] = p.provenance.d_p;
  j["d_b"] = p.provenance.d_b;
  j["mode"] = std::string(to_string(p.provenance.mode));
  j["corpus_ids"] = p.provenance.corpus_ids;
  j["created_at"] = p.provenance.created_at;
  j["warnings"] = p.background.warnings;
  j["people"] = matrix_json(p.people.matrix);
  j["background"] = matrix_json(p.background.directions);
  j["background_eigenvalues"] = Json::array();
  for (Eigen::Index i = 0; i < p.background.eigenvalues.size(); ++i) {
    j["background_eigenvalues"].push_back(p.background.eigenvalues(i));
  }
  j["composed"] = matrix_json(p.composed);
  return j.dump(1);
}

ProjectionPipeline pipeline_from_json(const std::string& text) {
  const Json j = parse_document(text, "pdiv-pipeline");
  ProjectionPipeline p;
  try {
    p.provenance.d_p = j.at("d_p").get<std::size_t>();
    p.provenance.d_b = j.at("d_b").get<std::size_t>();
    p.provenance.mode = parse_background_mode(j.at("mode").get<std::string>());
    p.provenance.corpus_ids = j.at("corpus_ids").get<std::vector<std::string>>();
    p.provenance.created_at = j.at("created_at").get<std::string>();
    p.background.warnings = j.value("warnings", std::vector<std::string>{});
    p.people.matrix = matrix_from(j.at("people"), "people");
    p.background.directions = matrix_from(j.at("background"), "background");
    const auto eig = j.at("background_eigenvalues").get<std::vector<double>>();
    p.background.eigenvalues = Eigen::Map<const Vector>(eig.data(), static_cast<Eigen::Index>(eig.size()));
    p.composed = matrix_from(j.at("composed"), "composed");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid pipeline document: ") + e.what());
  }
  p.background.d_p = p.people.d_p();
  require(p.provenance.d_p == p.people.d_p() && p.provenance.d_b == p.background.d_b() &&
              p.background.directions.cols() == p.people.matrix.rows() &&
              p.composed.rows() == p.people.matrix.rows() && p.composed.cols() == p.people.matrix.cols(),
          ErrorCode::kParse, "pipeline document has inconsistent shapes");
  return p;
}

std::string adapter_to_json(const TrainedAdapter& a) {
  Json j;
  j["format"] = "pdiv-adapter";
  j["variant"] = std::string(to_string(a.variant.kind));
  j["best_checkpoint_step"] = a.best_checkpoint_step;
  j["target"] = matrix_json(a.variant.target);
  j["matrix"] = matrix_json(a.matrix);
  Json history = Json::array();
  for (const auto& h : a.history) history.push_back(Json{{"step", h.step}, {"loss", h.train_loss}, {"val_error", h.val_error}});
  j["history"] = std::move(history);
  return j.dump(1);
}

TrainedAdapter adapter_from_json(const std::string& text) {
  const Json j = parse_document(text, "pdiv-adapter");
  TrainedAdapter a;
  try {
    a.variant.kind = parse_adapter_kind(j.at("variant").get<std::string>());
    a.best_checkpoint_step = j.at("best_checkpoint_step").get<std::size_t>();
    a.variant.target = matrix_from(j.at("target"), "target");
    a.matrix = matrix_from(j.at("matrix"), "matrix");
    for (const auto& h : j.at("history")) {
      a.history.push_back({h.at("step").get<std::size_t>(), h.at("loss").get<double>(), h.at("val_error").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid adapter document: ") + e.what());
  }
  require(a.matrix.rows() == a.variant.target.rows() && a.matrix.cols() == a.variant.target.cols(),
          ErrorCode::kParse, "adapter matrix shape does not match its target");
  return a;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    out.flush();
    require(out.good(), ErrorCode::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::kIo, "cannot replace " + path.string() + ": " + ec.message());
}

void save_pipeline(const std::filesystem::path& path, const ProjectionPipeline& pipeline) {
  write_text_file(path, pipeline_to_json(pipeline));
}

ProjectionPipeline load_pipeline(const std::filesystem::path& path) {
  return pipeline_from_json(read_text_file(path));
}

void save_adapter(const std::filesystem::path& path, const TrainedAdapter& adapter) {
  write_text_file(path, adapter_to_json(adapter));
}

TrainedAdapter load_adapter(const std::filesystem::path& path) {
  return adapter_from_json(read_text_file(path));
}

}  // namespace pdiv
