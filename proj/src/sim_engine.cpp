#include "curator/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <thread>

namespace curator {

namespace {

struct Candidate {
  double score;
  std::size_t doc_index;
};

// "Worse" ordering: lower score first, then later doc_id. The heap keeps the
// current worst candidate on top.
struct Worse {
  const std::vector<std::string>* ids;
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return a.score > b.score;
    return (*ids)[a.doc_index] < (*ids)[b.doc_index];
  }
};

double dot64(const Eigen::Ref<const Eigen::RowVectorXf>& a,
             const Eigen::Ref<const Eigen::RowVectorXf>& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

}  // namespace

std::vector<RankedList> topk(const EmbeddingStore& queries, const EmbeddingStore& corpus,
                             std::size_t k, const TopKOptions& options) {
  if (queries.dim != corpus.dim) {
    throw std::runtime_error("topk: dimension mismatch (" + std::to_string(queries.dim) +
                             " vs " + std::to_string(corpus.dim) + ")");
  }
  if (k < 1) throw std::runtime_error("topk: k must be >= 1");

  const std::size_t n_docs = corpus.count();
  const std::size_t depth = std::min(k, n_docs);

  std::vector<double> corpus_norms(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    corpus_norms[d] = std::sqrt(dot64(corpus.vectors.row(static_cast<Eigen::Index>(d)),
                                      corpus.vectors.row(static_cast<Eigen::Index>(d))));
  }

  std::vector<RankedList> results(queries.count());

  auto run_query = [&](std::size_t q) {
    const auto qrow = queries.vectors.row(static_cast<Eigen::Index>(q));
    const double qnorm = std::sqrt(dot64(qrow, qrow));

    Worse worse{&corpus.ids};
    std::priority_queue<Candidate, std::vector<Candidate>, Worse> heap(worse);

    const std::size_t chunk = std::max<std::size_t>(1, options.chunk_rows);
    for (std::size_t base = 0; base < n_docs; base += chunk) {
      const std::size_t end = std::min(base + chunk, n_docs);
      for (std::size_t d = base; d < end; ++d) {
        const double denom = qnorm * corpus_norms[d];
        const double score =
            denom > 0 ? dot64(qrow, corpus.vectors.row(static_cast<Eigen::Index>(d))) / denom
                      : 0.0;
        Candidate c{score, d};
        if (heap.size() < depth) {
          heap.push(c);
        } else if (worse(c, heap.top())) {
          heap.pop();
          heap.push(c);
        }
      }
    }

    RankedList list;
    list.query_id = queries.ids[q];
    list.k = k;
    list.entries.resize(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      const Candidate& c = heap.top();
      list.entries[i] = {corpus.ids[c.doc_index], static_cast<float>(c.score)};
      heap.pop();
    }
    results[q] = std::move(list);
  };

  unsigned n_threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  n_threads = std::max(1u, std::min<unsigned>(n_threads, queries.count() ? queries.count() : 1));
  if (n_threads <= 1 || queries.count() < 2) {
    for (std::size_t q = 0; q < queries.count(); ++q) run_query(q);
  } else {
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < n_threads; ++t) {
      workers.emplace_back([&] {
        for (;;) {
          std::size_t q = next.fetch_add(1);
          if (q >= queries.count()) break;
          run_query(q);
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  return results;
}

std::size_t rank_of(const RankedList& ranked, const std::string& doc_id) {
  for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
    if (ranked.entries[i].doc_id == doc_id) return i + 1;
  }
  return kBeyondK;
}

}  // namespace curator
