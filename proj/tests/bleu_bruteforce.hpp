#pragma once

// Straightforward BLEU used as an independent check of the production
// scorer: quadratic n-gram matching over token vectors, no hashing.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tagmt/textmetrics.hpp"
#include "tagmt/unicode.hpp"

namespace tagmt::testing {

inline std::vector<std::string> bleu_tokens(const std::string& line) {
  const auto tok = metrics::tokenize_intl(unicode::rtrim(line));
  std::vector<std::string> out;
  for (auto t : unicode::split_whitespace(tok)) out.emplace_back(t);
  return out;
}

inline double brute_force_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  double correct[4] = {0, 0, 0, 0};
  double total[4] = {0, 0, 0, 0};
  double sys_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto h = bleu_tokens(hyps[s]);
    const auto r = bleu_tokens(refs[s]);
    sys_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      if (h.size() < n) continue;
      std::vector<bool> used(r.size() >= n ? r.size() - n + 1 : 0, false);
      for (std::size_t i = 0; i + n <= h.size(); ++i) {
        total[n - 1] += 1;
        for (std::size_t j = 0; j < used.size(); ++j) {
          if (!used[j] && std::equal(h.begin() + i, h.begin() + i + n, r.begin() + j)) {
            used[j] = true;
            correct[n - 1] += 1;
            break;
          }
        }
      }
    }
  }
  double smooth = 1, log_sum = 0;
  for (int n = 0; n < 4; ++n) {
    double p = 0;
    if (total[n] == 0) {
      log_sum += -9999999999.0;
      continue;
    }
    if (correct[n] == 0) {
      smooth *= 2;
      p = 100.0 / (smooth * total[n]);
    } else {
      p = 100.0 * correct[n] / total[n];
    }
    log_sum += std::log(p);
  }
  const double bp = sys_len < ref_len ? (sys_len > 0 ? std::exp(1 - ref_len / sys_len) : 0.0) : 1.0;
  return bp * std::exp(log_sum / 4);
}

}  // namespace tagmt::testing
