#include "summafact/corpus.hpp"

#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "summafact/errors.hpp"
#include "summafact/util.hpp"

namespace summafact {

namespace {

// ---- minimal UTF-8 codec -------------------------------------------------

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    int extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      extra = 1;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      extra = 2;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      extra = 3;
    } else {
      // stray byte: pass through as Latin-1
      out.push_back(c);
      ++i;
      continue;
    }
    if (extra > 0 && i + extra >= s.size()) {  // truncated sequence
      out.push_back(c);
      ++i;
      continue;
    }
    bool valid = true;
    for (int k = 1; k <= extra; ++k) {
      unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (!valid) {
      out.push_back(c);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

// ---- canonical composition for the Latin-1 repertoire ---------------------

// (combining mark, base letter) -> precomposed codepoint. Covers the accents
// that actually occur in news text; other sequences pass through unchanged.
char32_t compose(char32_t base, char32_t mark) {
  auto pick = [&](const char* bases, const char32_t* composed) -> char32_t {
    for (int i = 0; bases[i]; ++i)
      if (static_cast<char32_t>(bases[i]) == base) return composed[i];
    return 0;
  };
  switch (mark) {
    case 0x0300: {  // grave
      static const char32_t t[] = {0xC0, 0xC8, 0xCC, 0xD2, 0xD9, 0xE0, 0xE8, 0xEC, 0xF2, 0xF9};
      return pick("AEIOUaeiou", t);
    }
    case 0x0301: {  // acute
      static const char32_t t[] = {0xC1, 0xC9, 0xCD, 0xD3, 0xDA, 0xDD,
                                   0xE1, 0xE9, 0xED, 0xF3, 0xFA, 0xFD};
      return pick("AEIOUYaeiouy", t);
    }
    case 0x0302: {  // circumflex
      static const char32_t t[] = {0xC2, 0xCA, 0xCE, 0xD4, 0xDB, 0xE2, 0xEA, 0xEE, 0xF4, 0xFB};
      return pick("AEIOUaeiou", t);
    }
    case 0x0303: {  // tilde
      static const char32_t t[] = {0xC3, 0xD1, 0xD5, 0xE3, 0xF1, 0xF5};
      return pick("ANOano", t);
    }
    case 0x0308: {  // diaeresis
      static const char32_t t[] = {0xC4, 0xCB, 0xCF, 0xD6, 0xDC, 0xE4, 0xEB, 0xEF, 0xF6, 0xFC, 0xFF};
      return pick("AEIOUaeiouy", t);
    }
    case 0x030A: {  // ring above
      static const char32_t t[] = {0xC5, 0xE5};
      return pick("Aa", t);
    }
    case 0x0327: {  // cedilla
      static const char32_t t[] = {0xC7, 0xE7};
      return pick("Cc", t);
    }
    default:
      return 0;
  }
}

bool is_space_cp(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' || cp == U'\f' ||
         cp == 0x00A0 || cp == 0x2028 || cp == 0x2029;
}

bool is_removable_control(char32_t cp) {
  if (cp < 0x20 || cp == 0x7F) return true;              // C0 + DEL
  if (cp >= 0x80 && cp <= 0x9F) return true;             // C1
  if (cp == 0x200B || cp == 0xFEFF) return true;         // zero width, BOM
  return false;
}

std::string clean(std::string_view raw) {
  std::vector<char32_t> cps = decode_utf8(raw);

  std::vector<char32_t> composed;
  composed.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (i + 1 < cps.size()) {
      char32_t pre = compose(cps[i], cps[i + 1]);
      if (pre != 0) {
        composed.push_back(pre);
        ++i;
        continue;
      }
    }
    composed.push_back(cps[i]);
  }

  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char32_t cp : composed) {
    if (is_space_cp(cp)) {
      pending_space = true;
      continue;
    }
    if (is_removable_control(cp)) continue;
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    encode_utf8(cp, out);
  }
  return out;
}

bool is_closing_mark(std::string_view text, std::size_t pos, std::size_t* len) {
  if (pos >= text.size()) return false;
  char c = text[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') {
    *len = 1;
    return true;
  }
  // U+2019 and U+201D
  if (text.compare(pos, 3, "\xe2\x80\x99") == 0 || text.compare(pos, 3, "\xe2\x80\x9d") == 0) {
    *len = 3;
    return true;
  }
  return false;
}

bool is_opening_mark(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

}  // namespace

std::string preprocess_allow_empty(std::string_view raw) { return clean(raw); }

std::string preprocess(std::string_view raw) {
  std::string out = clean(raw);
  if (out.empty()) throw Error(ErrorKind::validation, "text is empty after pre-processing");
  return out;
}

const std::vector<std::string>& abbreviation_list() {
  static const std::vector<std::string> abbreviations = {
      "Mr.",   "Mrs.",  "Ms.",   "Dr.",  "Prof.", "Sr.",   "Jr.",  "St.",  "Gen.",
      "Rep.",  "Sen.",  "Gov.",  "Lt.",  "Col.",  "Sgt.",  "Capt.", "Adm.", "Maj.",
      "U.S.",  "U.K.",  "U.N.",  "E.U.", "D.C.",  "a.m.",  "p.m.", "vs.",  "etc.",
      "e.g.",  "i.e.",  "cf.",   "No.",  "Inc.",  "Ltd.",  "Co.",  "Corp.", "Ave.",
      "Blvd.", "Rd.",   "Jan.",  "Feb.", "Mar.",  "Apr.",  "Jun.", "Jul.", "Aug.",
      "Sep.",  "Sept.", "Oct.",  "Nov.", "Dec.",  "Mt.",   "Ft."};
  return abbreviations;
}

namespace {

const std::unordered_set<std::string>& abbreviation_set() {
  static const std::unordered_set<std::string> set(abbreviation_list().begin(),
                                                   abbreviation_list().end());
  return set;
}

// Word ending at `dot` (inclusive). Periods embedded in the word are kept,
// so "U.S." comes back whole.
std::string word_ending_at(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && text[start - 1] != ' ') --start;
  return std::string(text.substr(start, dot - start + 1));
}

bool ends_sentence_at(std::string_view text, std::size_t punct_pos, std::size_t* boundary_end) {
  char p = text[punct_pos];
  std::size_t end = punct_pos;
  while (end + 1 < text.size() && (text[end + 1] == '.' || text[end + 1] == '!' ||
                                   text[end + 1] == '?'))
    ++end;
  std::size_t close_len = 0;
  while (is_closing_mark(text, end + 1, &close_len)) end += close_len;

  if (p == '.' && end == punct_pos) {
    std::string word = word_ending_at(text, punct_pos);
    if (abbreviation_set().count(word) > 0) return false;
    // single-letter initials ("J. Smith") never end a sentence
    if (word.size() == 2 && std::isupper(static_cast<unsigned char>(word[0]))) return false;
  }

  if (end + 1 >= text.size()) {
    *boundary_end = end;
    return true;
  }
  if (text[end + 1] != ' ') return false;
  std::size_t next = end + 2;
  while (next < text.size() && is_opening_mark(text[next])) ++next;
  if (next < text.size() && std::isupper(static_cast<unsigned char>(text[next]))) {
    *boundary_end = end;
    return true;
  }
  return false;
}

}  // namespace

SentenceList sentence_split(std::string_view text) {
  SentenceList list;
  if (text.empty()) return list;

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      std::size_t end = 0;
      if (ends_sentence_at(text, i, &end)) {
        std::string sentence = trim(text.substr(start, end - start + 1));
        if (!sentence.empty()) {
          list.sentences.push_back(std::move(sentence));
          list.offsets.push_back(start);
        }
        start = end + 1;
        while (start < text.size() && text[start] == ' ') ++start;
        i = start;
        continue;
      }
      i = (end > i) ? end + 1 : i + 1;
      continue;
    }
    ++i;
  }
  if (start < text.size()) {
    std::string tail = trim(text.substr(start));
    if (!tail.empty()) {
      list.sentences.push_back(std::move(tail));
      list.offsets.push_back(start);
    }
  }
  if (list.sentences.empty()) {
    list.sentences.emplace_back(text);
    list.offsets.push_back(0);
  }
  return list;
}

std::vector<Article> load_corpus(const std::filesystem::path& path,
                                 std::optional<std::size_t> limit) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open corpus file: " + path.string());

  std::vector<Article> articles;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (limit && articles.size() >= *limit) break;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;

    auto fail = [&](const std::string& what) -> Error {
      return Error(ErrorKind::validation, "line " + std::to_string(line_no) + ": " + what);
    };

    nlohmann::json record = nlohmann::json::parse(stripped, nullptr, false);
    if (record.is_discarded() || !record.is_object()) throw fail("malformed JSON record");
    if (!record.contains("id") || !record["id"].is_string()) throw fail("missing field \"id\"");
    if (!record.contains("article") || !record["article"].is_string())
      throw fail("missing field \"article\"");

    Article article;
    article.id = record["id"].get<std::string>();
    if (article.id.empty()) throw fail("empty article id");
    if (!seen_ids.insert(article.id).second)
      throw fail("duplicate article id \"" + article.id + "\"");

    try {
      article.body = preprocess(record["article"].get<std::string>());
    } catch (const Error&) {
      throw fail("article body empty after pre-processing");
    }
    if (record.contains("highlights") && record["highlights"].is_string())
      article.reference = preprocess_allow_empty(record["highlights"].get<std::string>());

    articles.push_back(std::move(article));
  }
  return articles;
}

}  // namespace summafact
