#include <cstdlib>
#include <cstring>
#include <iostream>

#include "acceptance/criteria.hpp"

int main(int argc, char** argv) {
    roiattn::acceptance::Options opts;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--verbose") == 0) opts.verbose = true;
        if (std::strcmp(argv[i], "--work-dir") == 0 && i + 1 < argc) opts.work_dir = argv[++i];
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            opts.only.push_back(std::atoi(argv[++i]));
        }
    }
    opts.live = &std::cout;
    const auto results = roiattn::acceptance::run_all(opts);
    return roiattn::acceptance::report(results, std::cout, true) ? 0 : 1;
}
