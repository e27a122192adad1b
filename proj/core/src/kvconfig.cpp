#include "intra/kvconfig.hpp"

#include <cerrno>
#include <charconv>
#include <filesystem>
#include <cstdlib>
#include <set>
#include <sstream>

#include "intra/binio.hpp"
#include "intra/error.hpp"

namespace intra {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<int> split_ints(const std::string& key, const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        int v = 0;
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || r.ec != std::errc{} || r.ptr != tok.data() + tok.size())
            fail(Errc::config, "config key " + key + ": '" + s + "' is not a list of integers");
        out.push_back(v);
    }
    return out;
}

std::string modes_csv(const std::vector<BenchMode>& modes) {
    std::string out;
    for (size_t i = 0; i < modes.size(); ++i) out += std::string(i ? "," : "") + bench_mode_name(modes[i]);
    return out;
}

std::string real_str(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text, const std::string& origin) {
    KvConfig c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            require(line.back() == ']' && line.size() > 2, Errc::config, where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, Errc::config, where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        require(!key.empty(), Errc::config, where + ": empty key");
        c.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
    }
    return c;
}

KvConfig KvConfig::load(const std::string& path) {
    require(std::filesystem::is_regular_file(path), Errc::config, "config file not found: " + path);
    const auto bytes = read_file(path);
    return parse(std::string(bytes.begin(), bytes.end()), path);
}

std::string KvConfig::str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) fail(Errc::config, "missing config key " + key);
    return it->second;
}

std::string KvConfig::str_or(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

int64_t KvConfig::integer_or(const std::string& key, int64_t def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& s = it->second;
    int64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size())
        fail(Errc::config, "config key " + key + ": '" + s + "' is not an integer");
    return v;
}

double KvConfig::real_or(const std::string& key, double def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& s = it->second;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || errno != 0 || end != s.c_str() + s.size())
        fail(Errc::config, "config key " + key + ": '" + s + "' is not a number");
    return v;
}

bool KvConfig::flag_or(const std::string& key, bool def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    fail(Errc::config, "config key " + key + ": '" + s + "' is not a boolean");
}

std::string KvConfig::dump() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
    return out;
}

RunConfig RunConfig::from_kv(const KvConfig& kv) {
    static const std::set<std::string> known = {
        "seed",          "paths.model",      "paths.pool",        "paths.params",     "paths.chunks",
        "paths.train",   "paths.eval",       "model.preset",      "model.init",       "retrieval.n0",
        "retrieval.n",   "retrieval.R",      "retrieval.L_p",     "retrieval.cosine_s0",
        "retrieval.full_rows_s0",            "retrieval.precision", "train.steps",    "train.lr",
        "train.warmup",  "train.batch",      "train.beta1",       "train.beta2",      "train.eps",
        "train.weight_decay",                "bench.axis",        "bench.values",     "bench.modes",
        "bench.M",       "bench.L_c",        "bench.L_q",         "bench.k",          "bench.L_g",
        "bench.reps",    "bench.warmup",     "bench.throughput",  "bench.rag_encoding",
        "corpus.M",      "corpus.L_c",       "corpus.vocab_size", "corpus.n_examples", "corpus.hops",
        "corpus.key_tokens_per_oracle",      "corpus.second_hop_keys", "corpus.entities_per_chunk",
        "corpus.overlap", "corpus.eval_fraction"};
    for (const auto& [k, v] : kv.entries())
        require(known.count(k) != 0, Errc::config, "unknown config key " + k);

    RunConfig c;
    c.seed = static_cast<uint64_t>(kv.integer_or("seed", static_cast<int64_t>(c.seed)));
    c.model_path = kv.str_or("paths.model", c.model_path);
    c.pool_path = kv.str_or("paths.pool", c.pool_path);
    c.params_path = kv.str_or("paths.params", c.params_path);
    c.chunks_path = kv.str_or("paths.chunks", c.chunks_path);
    c.train_path = kv.str_or("paths.train", c.train_path);
    c.eval_path = kv.str_or("paths.eval", c.eval_path);
    c.model_preset = kv.str_or("model.preset", c.model_preset);
    c.model_init = kv.str_or("model.init", c.model_init);

    c.n0 = static_cast<int>(kv.integer_or("retrieval.n0", c.n0));
    c.n = static_cast<int>(kv.integer_or("retrieval.n", c.n));
    c.R = static_cast<int>(kv.integer_or("retrieval.R", c.R));
    c.L_p = static_cast<int>(kv.integer_or("retrieval.L_p", c.L_p));
    c.cosine_s0 = kv.flag_or("retrieval.cosine_s0", c.cosine_s0);
    c.full_rows_s0 = kv.flag_or("retrieval.full_rows_s0", c.full_rows_s0);
    c.precision = kv.str_or("retrieval.precision", c.precision);

    auto& t = c.train;
    t.steps = static_cast<int>(kv.integer_or("train.steps", t.steps));
    t.lr = kv.real_or("train.lr", t.lr);
    t.warmup = static_cast<int>(kv.integer_or("train.warmup", t.warmup));
    t.batch = static_cast<int>(kv.integer_or("train.batch", t.batch));
    t.beta1 = kv.real_or("train.beta1", t.beta1);
    t.beta2 = kv.real_or("train.beta2", t.beta2);
    t.eps = kv.real_or("train.eps", t.eps);
    t.weight_decay = kv.real_or("train.weight_decay", t.weight_decay);

    auto& b = c.bench;
    b.axis = kv.str_or("bench.axis", b.axis);
    if (kv.has("bench.values")) b.values = split_ints("bench.values", kv.str("bench.values"));
    if (kv.has("bench.modes")) b.modes = parse_bench_modes(kv.str("bench.modes"));
    b.M = static_cast<int>(kv.integer_or("bench.M", b.M));
    b.L_c = static_cast<int>(kv.integer_or("bench.L_c", b.L_c));
    b.L_q = static_cast<int>(kv.integer_or("bench.L_q", b.L_q));
    b.k = static_cast<int>(kv.integer_or("bench.k", b.k));
    b.L_g = static_cast<int>(kv.integer_or("bench.L_g", b.L_g));
    b.reps = static_cast<int>(kv.integer_or("bench.reps", b.reps));
    b.warmup = static_cast<int>(kv.integer_or("bench.warmup", b.warmup));
    b.throughput = kv.flag_or("bench.throughput", b.throughput);
    if (kv.has("bench.rag_encoding")) b.encoding = parse_rag_encoding(kv.str("bench.rag_encoding"));

    auto& s = c.corpus;
    s.M = static_cast<int>(kv.integer_or("corpus.M", s.M));
    s.L_c = static_cast<int>(kv.integer_or("corpus.L_c", s.L_c));
    s.vocab_size = static_cast<int>(kv.integer_or("corpus.vocab_size", s.vocab_size));
    s.n_examples = static_cast<int>(kv.integer_or("corpus.n_examples", s.n_examples));
    s.hops = static_cast<int>(kv.integer_or("corpus.hops", s.hops));
    s.key_tokens_per_oracle = static_cast<int>(kv.integer_or("corpus.key_tokens_per_oracle", s.key_tokens_per_oracle));
    s.second_hop_keys = static_cast<int>(kv.integer_or("corpus.second_hop_keys", s.second_hop_keys));
    s.entities_per_chunk = static_cast<int>(kv.integer_or("corpus.entities_per_chunk", s.entities_per_chunk));
    s.overlap = kv.real_or("corpus.overlap", s.overlap);
    s.eval_fraction = kv.real_or("corpus.eval_fraction", s.eval_fraction);

    c.train.seed = c.bench.seed = s.seed = c.seed;
    c.train.n0 = c.n0;
    return c;
}

KvConfig RunConfig::to_kv() const {
    KvConfig kv;
    kv.set("seed", std::to_string(seed));
    kv.set("paths.model", model_path);
    kv.set("paths.pool", pool_path);
    kv.set("paths.params", params_path);
    kv.set("paths.chunks", chunks_path);
    kv.set("paths.train", train_path);
    kv.set("paths.eval", eval_path);
    kv.set("model.preset", model_preset);
    kv.set("model.init", model_init);
    kv.set("retrieval.n0", std::to_string(n0));
    kv.set("retrieval.n", std::to_string(n));
    kv.set("retrieval.R", std::to_string(R));
    kv.set("retrieval.L_p", std::to_string(L_p));
    kv.set("retrieval.cosine_s0", cosine_s0 ? "true" : "false");
    kv.set("retrieval.full_rows_s0", full_rows_s0 ? "true" : "false");
    kv.set("retrieval.precision", precision);
    kv.set("train.steps", std::to_string(train.steps));
    kv.set("train.lr", real_str(train.lr));
    kv.set("train.warmup", std::to_string(train.warmup));
    kv.set("train.batch", std::to_string(train.batch));
    kv.set("train.beta1", real_str(train.beta1));
    kv.set("train.beta2", real_str(train.beta2));
    kv.set("train.eps", real_str(train.eps));
    kv.set("train.weight_decay", real_str(train.weight_decay));
    kv.set("bench.axis", bench.axis);
    kv.set("bench.values", join_ints(bench.values));
    kv.set("bench.modes", modes_csv(bench.modes));
    kv.set("bench.M", std::to_string(bench.M));
    kv.set("bench.L_c", std::to_string(bench.L_c));
    kv.set("bench.L_q", std::to_string(bench.L_q));
    kv.set("bench.k", std::to_string(bench.k));
    kv.set("bench.L_g", std::to_string(bench.L_g));
    kv.set("bench.reps", std::to_string(bench.reps));
    kv.set("bench.warmup", std::to_string(bench.warmup));
    kv.set("bench.throughput", bench.throughput ? "true" : "false");
    kv.set("bench.rag_encoding", bench.encoding == RagEncoding::joint ? "joint" : "per_chunk");
    kv.set("corpus.M", std::to_string(corpus.M));
    kv.set("corpus.L_c", std::to_string(corpus.L_c));
    kv.set("corpus.vocab_size", std::to_string(corpus.vocab_size));
    kv.set("corpus.n_examples", std::to_string(corpus.n_examples));
    kv.set("corpus.hops", std::to_string(corpus.hops));
    kv.set("corpus.key_tokens_per_oracle", std::to_string(corpus.key_tokens_per_oracle));
    kv.set("corpus.second_hop_keys", std::to_string(corpus.second_hop_keys));
    kv.set("corpus.entities_per_chunk", std::to_string(corpus.entities_per_chunk));
    kv.set("corpus.overlap", real_str(corpus.overlap));
    kv.set("corpus.eval_fraction", real_str(corpus.eval_fraction));
    return kv;
}

void RunConfig::validate() const {
    require(n0 >= 0, Errc::config, "retrieval.n0 must be >= 0");
    require(n >= 1, Errc::config, "retrieval.n must be >= 1");
    require(R >= 1, Errc::config, "retrieval.R must be >= 1");
    require(L_p >= 1, Errc::config, "retrieval.L_p must be >= 1");
    require(model_init == "random" || model_init == "structured", Errc::config,
            "model.init must be random or structured");
    parse_precision(precision);
    preset_config(model_preset);
    train.validate();
}

}  // namespace intra
