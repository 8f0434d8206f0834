#include "pdiv/corpus.hpp"

#include "pdiv/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pdiv {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::vector<std::string>> read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  return parse_csv(in);
}

void check_type_text_header(const std::vector<std::vector<std::string>>& rows,
                            const std::filesystem::path& path) {
  require(!rows.empty() && rows[0].size() >= 2 && trim(rows[0][0]) == "Type" &&
              trim(rows[0][1]) == "Text",
          ErrorCode::kParse, path.string() + ": expected header 'Type,Text'");
}

}  // namespace

std::string PhraseRecord::base_phrase() const { return render_phrase(adjective, noun); }

std::string render_phrase(const std::string& adjective, const std::string& noun,
                          const std::string& location) {
  std::string phrase = adjective.empty() ? noun : adjective + " " + noun;
  if (!location.empty()) phrase += " at the " + location;
  return phrase;
}

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && row[0].empty();
    if (!blank) rows.push_back(row);
    row.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c != '\r') {
      field += c;
      field_started = true;
    }
  }
  require(!in_quotes, ErrorCode::kParse, "unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

PhraseCorpus load_phrase_corpus(const std::filesystem::path& adjectives_csv,
                                const std::filesystem::path& nouns_locations_csv) {
  PhraseCorpus corpus;
  const auto adjective_rows = read_csv_file(adjectives_csv);
  check_type_text_header(adjective_rows, adjectives_csv);
  for (std::size_t i = 1; i < adjective_rows.size(); ++i) {
    const auto& r = adjective_rows[i];
    require(r.size() >= 2, ErrorCode::kParse,
            adjectives_csv.string() + ": row " + std::to_string(i + 1) + " has too few fields");
    const std::string text = trim(r[1]);
    if (text.empty()) continue;
    corpus.adjectives.push_back({trim(r[0]), text});
  }
  const auto noun_rows = read_csv_file(nouns_locations_csv);
  check_type_text_header(noun_rows, nouns_locations_csv);
  for (std::size_t i = 1; i < noun_rows.size(); ++i) {
    const auto& r = noun_rows[i];
    require(r.size() >= 2, ErrorCode::kParse,
            nouns_locations_csv.string() + ": row " + std::to_string(i + 1) +
                " has too few fields");
    const std::string type = trim(r[0]);
    const std::string text = trim(r[1]);
    if (text.empty()) continue;
    if (type == "Noun") {
      corpus.nouns.push_back(text);
    } else if (type == "Location") {
      corpus.locations.push_back(text);
    } else {
      fail(ErrorCode::kParse, nouns_locations_csv.string() + ": unknown Type '" + type +
                                  "' (expected Noun or Location)");
    }
  }
  return corpus;
}

void save_phrase_corpus(const PhraseCorpus& corpus, const std::filesystem::path& adjectives_csv,
                        const std::filesystem::path& nouns_locations_csv) {
  std::ofstream adj(adjectives_csv);
  require(adj.good(), ErrorCode::kIo, "cannot write " + adjectives_csv.string());
  adj << "Type,Text\n";
  for (const auto& a : corpus.adjectives) adj << csv_escape(a.type) << ',' << csv_escape(a.text) << '\n';
  std::ofstream nl(nouns_locations_csv);
  require(nl.good(), ErrorCode::kIo, "cannot write " + nouns_locations_csv.string());
  nl << "Type,Text\n";
  for (const auto& n : corpus.nouns) nl << "Noun," << csv_escape(n) << '\n';
  for (const auto& l : corpus.locations) nl << "Location," << csv_escape(l) << '\n';
}

std::vector<PhraseRecord> person_phrase_records(const PhraseCorpus& corpus) {
  std::vector<PhraseRecord> records;
  records.reserve(corpus.nouns.size() * corpus.adjectives.size());
  for (const auto& noun : corpus.nouns) {
    for (const auto& adjective : corpus.adjectives) {
      records.push_back({noun, adjective.text, "", adjective.type,
                         render_phrase(adjective.text, noun)});
    }
  }
  return records;
}

std::vector<PhraseRecord> location_phrase_records(const PhraseCorpus& corpus) {
  std::vector<PhraseRecord> records;
  records.reserve(corpus.nouns.size() * corpus.adjectives.size() * corpus.locations.size());
  for (const auto& noun : corpus.nouns) {
    for (const auto& adjective : corpus.adjectives) {
      for (const auto& location : corpus.locations) {
        records.push_back({noun, adjective.text, location, adjective.type,
                           render_phrase(adjective.text, noun, location)});
      }
    }
  }
  return records;
}

void check_records_resolve(const std::vector<PhraseRecord>& records, const EmbeddingTable& table) {
  for (const auto& r : records) {
    require(!render_phrase(r.adjective, r.noun, r.location).empty(), ErrorCode::kInvalidArgument,
            "empty phrase record");
    require(table.find(r.embedding_id).has_value(), ErrorCode::kNotFound,
            "phrase embedding '" + r.embedding_id + "' missing from table");
  }
}

std::vector<QueryRecord> parse_query_list(std::istream& in) {
  const auto rows = parse_csv(in);
  require(!rows.empty(), ErrorCode::kParse, "query list is empty");
  std::vector<std::string> header;
  for (const auto& h : rows[0]) header.push_back(trim(h));
  const auto has = [&](const std::string& name) {
    return std::find(header.begin(), header.end(), name) != header.end();
  };
  require(has("query type") && has("query"), ErrorCode::kParse,
          "query list header must contain 'query type' and 'query'");
  std::vector<QueryRecord> queries;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    QueryRecord q;
    for (std::size_t c = 0; c < header.size() && c < rows[i].size(); ++c) {
      q.fields[header[c]] = trim(rows[i][c]);
    }
    q.query_type = q.fields["query type"];
    q.query = q.fields["query"];
    for (int k = 1; k <= 4; ++k) {
      const auto it = q.fields.find("diversity subquery " + std::to_string(k));
      if (it != q.fields.end() && !it->second.empty()) q.diversity_subqueries.push_back(it->second);
    }
    for (int k = 1; k <= 2; ++k) {
      const auto it = q.fields.find("irrelevant subquery " + std::to_string(k));
      if (it != q.fields.end() && !it->second.empty()) q.irrelevant_subqueries.push_back(it->second);
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::vector<QueryRecord> load_query_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  return parse_query_list(in);
}

}  // namespace pdiv
