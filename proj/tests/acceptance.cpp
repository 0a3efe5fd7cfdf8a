#include <cstring>
#include <iostream>
#include <numeric>
#include <string>

#include "wignerpose/criteria.hpp"

// One line per criterion; exit status 1 when any criterion fails.
int main(int argc, char** argv) {
  wignerpose::CriteriaOptions opt;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--large") == 0) {
      opt.large = true;
    } else if (std::strcmp(argv[i], "--cache") == 0 && i + 1 < argc) {
      opt.cache_dir = argv[++i];
    } else {
      ids.push_back(std::stoi(argv[i]));
    }
  }
  if (ids.empty()) {
    ids.resize(wignerpose::kCriterionCount);
    std::iota(ids.begin(), ids.end(), 1);
  }
  int failed = 0;
  for (int id : ids) {
    const auto r = wignerpose::check_criterion(id, opt);
    std::cout << wignerpose::format_result(r) << std::endl;
    failed += !r.pass;
  }
  std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
