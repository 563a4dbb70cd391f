#ifndef LMVR_DETAIL_TRANSFORM_LINES_HPP
#define LMVR_DETAIL_TRANSFORM_LINES_HPP

#include <algorithm>
#include <exception>
#include <istream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "lmvr/error.hpp"

namespace lmvr {

template <typename Fn>
void transform_lines(std::istream& in, std::ostream& out, unsigned threads,
                     Fn&& fn) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));

  std::vector<std::string> results(lines.size());
  std::vector<std::exception_ptr> errors(lines.size());
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        results[i] = fn(lines[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, lines.size()));
  if (n_workers == 1) {
    work(0, lines.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (lines.size() + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(lines.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " (line " +
                        std::to_string(i + 1) + ")");
      }
    }
    out << results[i] << '\n';
  }
}

}  // namespace lmvr

#endif  // LMVR_DETAIL_TRANSFORM_LINES_HPP
