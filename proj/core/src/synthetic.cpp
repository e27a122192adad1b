#include "intra/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "intra/binio.hpp"
#include "intra/error.hpp"

namespace intra {

namespace {

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi_excl) {
    return std::uniform_int_distribution<int>(lo, hi_excl - 1)(rng);
}

// k distinct ids from [lo, hi), in random order.
std::vector<int> sample_range(Rng& rng, int lo, int hi, int k) {
    std::vector<int> v(static_cast<size_t>(hi - lo));
    std::iota(v.begin(), v.end(), lo);
    for (int i = 0; i < k; ++i) std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(uniform(rng, i, hi - lo))]);
    v.resize(static_cast<size_t>(k));
    return v;
}

int n_eval_of(const SyntheticTaskSpec& s) {
    return static_cast<int>(std::lround(s.n_examples * s.eval_fraction));
}

}  // namespace

void SyntheticTaskSpec::validate() const {
    require(hops == 1 || hops == 2, Errc::config, "hops must be 1 or 2");
    require(n_examples >= 1, Errc::config, "n_examples must be >= 1");
    require(L_c >= 1, Errc::config, "L_c must be >= 1");
    require(key_tokens_per_oracle >= 2, Errc::config, "key_tokens_per_oracle must be >= 2");
    require(hops == 1 || second_hop_keys >= 1, Errc::config, "second_hop_keys must be >= 1 for hops = 2");
    require(entities_per_chunk >= 0, Errc::config, "entities_per_chunk must be >= 0");
    require(overlap >= 0.0 && overlap <= 1.0, Errc::config, "overlap must be in [0, 1]");
    require(eval_fraction >= 0.0 && eval_fraction < 1.0, Errc::config, "eval_fraction must be in [0, 1)");
    const VocabLayout v = vocab_layout(vocab_size);
    const int n_ent = v.ent_end - v.ent_begin;
    const int keys = key_tokens_per_oracle + (hops == 2 ? second_hop_keys : 0);
    const int first = key_tokens_per_oracle + 1 + entities_per_chunk;
    const int second = hops == 2 ? 1 + second_hop_keys + 1 + entities_per_chunk : 0;
    const int distract = entities_per_chunk + 3;
    const int need = std::max({first, second, distract});
    require(L_c >= need, Errc::config,
            "L_c = " + std::to_string(L_c) + " cannot hold the keys, link, answer and entities (need " +
                std::to_string(need) + ")");
    require(keys + entities_per_chunk <= n_ent, Errc::config, "vocabulary has too few entity tokens for this spec");
    require(M >= hops * n_examples, Errc::config,
            "M = " + std::to_string(M) + " cannot hold " + std::to_string(hops * n_examples) + " oracle chunks");
    const int n_eval = n_eval_of(*this);
    require(n_examples - n_eval >= 1, Errc::config, "eval_fraction leaves no training examples");
}

SyntheticCorpus gen_corpus(const SyntheticTaskSpec& spec) {
    spec.validate();
    const VocabLayout v = vocab_layout(spec.vocab_size);
    Rng rng(spec.seed);
    std::vector<std::vector<int>> raw;
    std::vector<QAExample> examples;
    std::vector<std::vector<int>> keys_of;

    auto new_chunk = [&](std::vector<int> toks) {
        while (static_cast<int>(toks.size()) < spec.L_c) toks.push_back(uniform(rng, v.fill_begin, v.fill_end));
        std::shuffle(toks.begin(), toks.end(), rng);
        raw.push_back(std::move(toks));
        return static_cast<int64_t>(raw.size() - 1);
    };

    const int kA = spec.key_tokens_per_oracle;
    const int kB = spec.hops == 2 ? spec.second_hop_keys : 0;
    for (int e = 0; e < spec.n_examples; ++e) {
        const auto ents = sample_range(rng, v.ent_begin, v.ent_end, kA + kB);
        const std::vector<int> keys_a(ents.begin(), ents.begin() + kA), keys_b(ents.begin() + kA, ents.end());
        const int ans = uniform(rng, v.ans_begin, v.ans_end);
        QAExample ex;
        ex.id = e;
        ex.answer = {ans};
        if (spec.hops == 2) {
            const int link = uniform(rng, v.link_begin, v.link_end);
            std::vector<int> a = keys_a;
            a.push_back(link);
            for (int t : sample_range(rng, v.ent_begin, v.ent_end, spec.entities_per_chunk)) a.push_back(t);
            std::vector<int> b{link};
            b.insert(b.end(), keys_b.begin(), keys_b.end());
            b.push_back(ans);
            for (int t : sample_range(rng, v.ent_begin, v.ent_end, spec.entities_per_chunk)) b.push_back(t);
            ex.oracle = {new_chunk(a), new_chunk(b)};
        } else {
            std::vector<int> a = keys_a;
            a.push_back(ans);
            for (int t : sample_range(rng, v.ent_begin, v.ent_end, spec.entities_per_chunk)) a.push_back(t);
            ex.oracle = {new_chunk(a)};
        }
        ex.question = ents;
        std::shuffle(ex.question.begin(), ex.question.end(), rng);
        ex.question.push_back(v.sep);
        keys_of.push_back(ents);
        examples.push_back(std::move(ex));
    }

    std::bernoulli_distribution plant(spec.overlap);
    const int n_distract = spec.M - static_cast<int>(raw.size());
    for (int k = 0; k < n_distract; ++k) {
        std::vector<int> toks = sample_range(rng, v.ent_begin, v.ent_end, spec.entities_per_chunk + 1);
        toks.push_back(uniform(rng, v.link_begin, v.link_end));
        toks.push_back(uniform(rng, v.ans_begin, v.ans_end));
        if (plant(rng)) {
            const auto& keys = keys_of[static_cast<size_t>(uniform(rng, 0, spec.n_examples))];
            const auto pick = sample_range(rng, 0, static_cast<int>(keys.size()), 2);
            toks[0] = keys[static_cast<size_t>(pick[0])];
            toks[1] = keys[static_cast<size_t>(pick[1])];
        }
        new_chunk(toks);
    }

    // Shuffle pool order so oracle chunks are not clustered; ids follow positions.
    std::vector<int64_t> perm(raw.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int64_t> new_id(raw.size());
    SyntheticCorpus out;
    out.chunks.resize(raw.size());
    for (size_t pos = 0; pos < perm.size(); ++pos) {
        new_id[static_cast<size_t>(perm[pos])] = static_cast<int64_t>(pos);
        out.chunks[pos] = {static_cast<int64_t>(pos), raw[static_cast<size_t>(perm[pos])]};
    }
    for (auto& ex : examples)
        for (auto& o : ex.oracle) o = new_id[static_cast<size_t>(o)];

    const int n_train = spec.n_examples - n_eval_of(spec);
    out.train.assign(examples.begin(), examples.begin() + n_train);
    out.eval.assign(examples.begin() + n_train, examples.end());
    return out;
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(Errc::io, "cannot create " + dir + ": " + ec.message());
    write_file_atomic(dir + "/chunks.jsonl", chunks_jsonl(corpus.chunks));
    write_file_atomic(dir + "/train.jsonl", dataset_jsonl(corpus.train));
    write_file_atomic(dir + "/eval.jsonl", dataset_jsonl(corpus.eval));
}

}  // namespace intra
