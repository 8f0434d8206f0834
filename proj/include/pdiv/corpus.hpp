#pragma once

#include "pdiv/embedding.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pdiv {

/// One adjective + noun (+ location) phrase and the id of its text embedding.
struct PhraseRecord {
  std::string noun;
  std::string adjective;           // may be empty
  std::string location;            // may be empty
  std::string attribute_category;  // e.g. "Age", "Religion"
  std::string embedding_id;

  std::string base_phrase() const;  // adjective + noun, without location
};

/// "adjective noun", plus " at the location" when a location is given.
std::string render_phrase(const std::string& adjective, const std::string& noun,
                          const std::string& location = {});

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);
std::string csv_escape(const std::string& field);

struct WordEntry {
  std::string type;
  std::string text;
};

struct PhraseCorpus {
  std::vector<WordEntry> adjectives;  // type = attribute category
  std::vector<std::string> nouns;
  std::vector<std::string> locations;
};

/// Reads the `Type,Text` adjective file and the `Type,Text` noun/location file
/// (Type is `Noun` or `Location`).
PhraseCorpus load_phrase_corpus(const std::filesystem::path& adjectives_csv,
                                const std::filesystem::path& nouns_locations_csv);
void save_phrase_corpus(const PhraseCorpus& corpus, const std::filesystem::path& adjectives_csv,
                        const std::filesystem::path& nouns_locations_csv);

std::vector<PhraseRecord> person_phrase_records(const PhraseCorpus& corpus);
std::vector<PhraseRecord> location_phrase_records(const PhraseCorpus& corpus);

/// Throws kNotFound listing the first missing embedding id.
void check_records_resolve(const std::vector<PhraseRecord>& records, const EmbeddingTable& table);

/// A row of the query list. Only the named columns are interpreted; every
/// column is kept in `fields`.
struct QueryRecord {
  std::string query_type;
  std::string query;
  std::vector<std::string> diversity_subqueries;
  std::vector<std::string> irrelevant_subqueries;
  std::map<std::string, std::string> fields;
};

std::vector<QueryRecord> parse_query_list(std::istream& in);
std::vector<QueryRecord> load_query_list(const std::filesystem::path& path);

}  // namespace pdiv
