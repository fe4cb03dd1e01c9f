#include "ratkit/diversity.hpp"

#include <map>
#include <set>

namespace ratkit {

void require_nonzero_norms(const EmbeddingGroup& group) {
  for (Index i = 0; i < group.size(); ++i) {
    if (!(group.embeddings.row(i).norm() > 0)) {
      const auto& m = group.members[static_cast<std::size_t>(i)];
      throw ValidationError("zero-norm embedding: record " + std::to_string(m.record_index + 1) + " (input '" +
                            group.input_id + "', source '" + m.source_id + "', backend '" + group.backend_id +
                            "')");
    }
  }
}

void normalize_groups(std::vector<EmbeddingGroup>& groups) {
  for (auto& g : groups) {
    require_nonzero_norms(g);
    g.embeddings = normalized_rows(g.embeddings);
  }
}

SourcePairMatrices source_pair_matrices(const std::vector<EmbeddingGroup>& groups, double tau,
                                        std::string_view generator) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0, 1]");
  std::set<std::string> all;
  for (const auto& g : groups) {
    for (const auto& s : g.sources(generator)) all.insert(s);
  }
  SourcePairMatrices out;
  out.sources.assign(all.begin(), all.end());
  const auto k = static_cast<Index>(out.sources.size());
  std::map<std::string, Index> slot;
  for (Index i = 0; i < k; ++i) slot[out.sources[static_cast<std::size_t>(i)]] = i;

  MatrixXd cos_sum = MatrixXd::Zero(k, k);
  MatrixXd dup_sum = MatrixXd::Zero(k, k);
  out.common_inputs = Eigen::MatrixXi::Zero(k, k);

  for (const auto& g : groups) {
    require_nonzero_norms(g);
    std::map<Index, std::vector<Index>> rows;  // source slot -> member rows
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      const auto& m = g.members[i];
      if (!generator.empty() && m.generator_id != generator) continue;
      rows[slot.at(m.source_id)].push_back(static_cast<Index>(i));
    }
    for (auto a = rows.begin(); a != rows.end(); ++a) {
      for (auto b = std::next(a); b != rows.end(); ++b) {
        double c_sum = 0.0, n_sum = 0.0;
        for (Index i : a->second) {
          for (Index j : b->second) {
            const double c = cosine(g.embeddings.row(i), g.embeddings.row(j));
            c_sum += c;
            n_sum += c >= tau ? 1.0 : 0.0;
          }
        }
        const double cross = static_cast<double>(a->second.size() * b->second.size());
        const Index p = a->first, q = b->first;
        cos_sum(p, q) += c_sum / cross;
        dup_sum(p, q) += n_sum / cross;
        out.common_inputs(p, q) += 1;
      }
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.cosine_mean = MatrixXd::Constant(k, k, nan);
  out.near_dup = MatrixXd::Constant(k, k, nan);
  for (Index p = 0; p < k; ++p) {
    out.cosine_mean(p, p) = 1.0;
    out.near_dup(p, p) = 0.0;
    for (Index q = p + 1; q < k; ++q) {
      const int n = out.common_inputs(p, q);
      out.common_inputs(q, p) = n;
      if (n == 0) continue;
      out.cosine_mean(p, q) = out.cosine_mean(q, p) = cos_sum(p, q) / n;
      out.near_dup(p, q) = out.near_dup(q, p) = dup_sum(p, q) / n;
    }
  }
  out.distance = (1.0 - out.cosine_mean.array()).matrix();
  return out;
}

ProxyRow proxy_row(const EmbeddingGroup& selection, const EmbeddingGroup& pool, double alpha, double tau) {
  ProxyRow row;
  row.input_id = selection.input_id;
  row.members = selection.size();
  if (selection.size() == 0) return row;

  const auto cov = coverage(pool.embeddings, selection.embeddings);
  row.r_avg = cov.r_avg;
  row.r_max = cov.r_max;

  const auto spec = spectral(selection.embeddings, alpha);
  row.spectral_degenerate = spec.degenerate;
  if (!spec.degenerate) {
    row.erank = spec.erank;
    row.logdet = spec.logdet;
    row.pr = spec.pr;
    row.anisotropy = spec.anisotropy;
  }
  if (selection.size() >= 2) {
    require_nonzero_norms(selection);
    const auto red = redundancy(selection.embeddings, tau);
    row.d_pair = red.d_pair;
    row.sim_avg = red.sim_avg;
    row.near_dup_rate = red.near_dup_rate;
  }
  return row;
}

}  // namespace ratkit
