#include "lrurec/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lrurec {

std::uint64_t fnv1a64(const void* data, size_t n, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed ? seed : 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
std::vector<std::string> split_fields(const std::string& line,
                                      const std::string& delim) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t next = line.find(delim, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + delim.size();
  }
  return out;
}
}  // namespace

std::vector<Interaction> parse_interactions(std::istream& in,
                                            const ParseOptions& opt) {
  require(!opt.delimiter.empty(), "parse_interactions: empty delimiter");
  int need = std::max({opt.user_col, opt.item_col, opt.time_col}) + 1;
  std::vector<Interaction> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, opt.delimiter);
    if (static_cast<int>(fields.size()) < need)
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": expected at least " + std::to_string(need) +
                               " fields");
    const std::string& ts = fields[opt.time_col];
    char* end = nullptr;
    long long t = std::strtoll(ts.c_str(), &end, 10);
    if (ts.empty() || end == nullptr || *end != '\0')
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": non-numeric timestamp '" + ts + "'");
    Interaction it;
    it.user = fields[opt.user_col];
    it.item = fields[opt.item_col];
    it.ts = t;
    if (it.user.empty() || it.item.empty())
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": empty user or item field");
    out.push_back(std::move(it));
  }
  return out;
}

std::vector<Interaction> filter_min_interactions(
    const std::vector<Interaction>& log, int min_count) {
  require(min_count >= 1, "filter_min_interactions: min_count must be >= 1");
  std::unordered_map<std::string, int> item_count;
  for (const auto& it : log) ++item_count[it.item];
  std::unordered_map<std::string, int> user_count;
  for (const auto& it : log)
    if (item_count[it.item] >= min_count) ++user_count[it.user];
  std::vector<Interaction> out;
  out.reserve(log.size());
  for (const auto& it : log)
    if (item_count[it.item] >= min_count && user_count[it.user] >= min_count)
      out.push_back(it);
  return out;
}

std::uint64_t SplitDataset::vocab_hash() const {
  std::uint64_t h = 0;
  for (size_t i = 1; i < item_of_id.size(); ++i) {
    h = fnv1a64(item_of_id[i].data(), item_of_id[i].size(), h);
    h = fnv1a64("\x1f", 1, h);
  }
  return h;
}

SplitDataset build_split(const std::vector<Interaction>& log, int max_len) {
  require(max_len >= 1, "build_split: max_len must be >= 1");
  SplitDataset ds;
  ds.max_len = max_len;

  // First-appearance order keeps the output stable across runs.
  std::unordered_map<std::string, int> user_idx;
  std::vector<std::string> user_order;
  std::vector<std::vector<std::pair<long long, int>>> per_user;  // (ts, item id)
  ds.item_of_id.push_back("");  // id 0 reserved for padding
  for (const auto& it : log) {
    auto [iit, inserted] =
        ds.id_of_item.try_emplace(it.item, static_cast<int>(ds.item_of_id.size()));
    if (inserted) ds.item_of_id.push_back(it.item);
    auto [uit, unew] =
        user_idx.try_emplace(it.user, static_cast<int>(user_order.size()));
    if (unew) {
      user_order.push_back(it.user);
      per_user.emplace_back();
    }
    per_user[uit->second].emplace_back(it.ts, iit->second);
  }

  for (size_t u = 0; u < user_order.size(); ++u) {
    auto& seq = per_user[u];
    std::stable_sort(seq.begin(), seq.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (seq.size() < 3) continue;  // split infeasible
    // Split first, then keep the most recent max_len training items.
    size_t m = seq.size();
    UserSplit us;
    us.test = seq[m - 1].second;
    us.val = seq[m - 2].second;
    size_t train_n = m - 2;
    size_t start = train_n > static_cast<size_t>(max_len)
                       ? train_n - static_cast<size_t>(max_len)
                       : 0;
    for (size_t i = start; i < train_n; ++i) us.train.push_back(seq[i].second);
    ds.users.push_back(user_order[u]);
    ds.seqs.push_back(std::move(us));
  }
  return ds;
}

void save_split(const SplitDataset& ds, const std::string& manifest_path,
                const std::string& idmap_path, const std::string& header) {
  std::ofstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot write manifest: " + manifest_path);
  mf << "# " << header << "\n";
  mf << "maxlen\t" << ds.max_len << "\n";
  for (size_t u = 0; u < ds.users.size(); ++u) {
    mf << ds.users[u] << "\t";
    const auto& s = ds.seqs[u];
    for (size_t i = 0; i < s.train.size(); ++i) {
      if (i) mf << ' ';
      mf << s.train[i];
    }
    mf << "\t" << s.val << "\t" << s.test << "\n";
  }
  std::ofstream im(idmap_path);
  if (!im) throw std::runtime_error("cannot write id map: " + idmap_path);
  im << "# " << header << "\n";
  for (size_t i = 1; i < ds.item_of_id.size(); ++i)
    im << i << "\t" << ds.item_of_id[i] << "\n";
  if (!mf || !im) throw std::runtime_error("split write failed");
}

SplitDataset load_split(const std::string& manifest_path,
                        const std::string& idmap_path) {
  SplitDataset ds;
  std::ifstream im(idmap_path);
  if (!im) throw std::runtime_error("cannot open id map: " + idmap_path);
  ds.item_of_id.push_back("");
  std::string line;
  while (std::getline(im, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("malformed id map line: " + line);
    int id = std::stoi(line.substr(0, tab));
    std::string raw = line.substr(tab + 1);
    if (id != static_cast<int>(ds.item_of_id.size()))
      throw std::runtime_error("id map not contiguous at id " +
                               std::to_string(id));
    ds.id_of_item[raw] = id;
    ds.item_of_id.push_back(raw);
  }

  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot open manifest: " + manifest_path);
  while (std::getline(mf, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = {};
    size_t pos = 0;
    while (true) {
      size_t next = line.find('\t', pos);
      if (next == std::string::npos) {
        fields.push_back(line.substr(pos));
        break;
      }
      fields.push_back(line.substr(pos, next - pos));
      pos = next + 1;
    }
    if (fields.size() == 2 && fields[0] == "maxlen") {
      ds.max_len = std::stoi(fields[1]);
      continue;
    }
    if (fields.size() != 4)
      throw std::runtime_error("malformed manifest line: " + line);
    UserSplit us;
    std::istringstream ss(fields[1]);
    int id;
    while (ss >> id) us.train.push_back(id);
    us.val = std::stoi(fields[2]);
    us.test = std::stoi(fields[3]);
    ds.users.push_back(fields[0]);
    ds.seqs.push_back(std::move(us));
  }
  return ds;
}

std::vector<Batch> make_batches(const std::vector<std::vector<int>>& train_seqs,
                                int batch_size, int max_len, Rng& rng) {
  require(batch_size >= 1, "make_batches: batch_size must be >= 1");
  require(max_len >= 1, "make_batches: max_len must be >= 1");
  std::vector<int> order;
  for (size_t i = 0; i < train_seqs.size(); ++i)
    if (train_seqs[i].size() >= 2) order.push_back(static_cast<int>(i));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<Batch> out;
  for (size_t pos = 0; pos < order.size(); pos += batch_size) {
    size_t n = std::min(static_cast<size_t>(batch_size), order.size() - pos);
    int longest = 1;
    for (size_t r = 0; r < n; ++r) {
      int m = static_cast<int>(train_seqs[order[pos + r]].size());
      longest = std::max(longest, std::min(m - 1, max_len));
    }
    int lp = next_pow2(longest);
    Batch b;
    b.ids = IdMatrix(static_cast<int>(n), lp);
    b.targets = IdMatrix(static_cast<int>(n), lp);
    b.mask = PadMask(static_cast<int>(n), lp);
    for (size_t r = 0; r < n; ++r) {
      const auto& s = train_seqs[order[pos + r]];
      int m = static_cast<int>(s.size());
      int in_len = std::min(m - 1, max_len);
      b.true_len.push_back(in_len);
      for (int k = 0; k < lp; ++k) b.mask.set(static_cast<int>(r), k, false);
      for (int j = 0; j < in_len; ++j) {
        int k = lp - in_len + j;
        b.ids.at(static_cast<int>(r), k) = s[m - 1 - in_len + j];
        b.targets.at(static_cast<int>(r), k) = s[m - in_len + j];
        b.mask.set(static_cast<int>(r), k, true);
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace lrurec
