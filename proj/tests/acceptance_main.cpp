#include <cstdlib>
#include <fstream>
#include <iostream>

#include "plab/acceptance.hpp"

// usage: acceptance [name ...] [--json out.json]
int main(int argc, char** argv)
{
    using namespace plab::acceptance;
    std::vector<std::string> names;
    std::string json_out;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--json" && i + 1 < argc)
            json_out = argv[++i];
        else
            names.push_back(a);
    }
    if (names.empty()) names = Suite::names();

    Suite suite;
    json all = json::array();
    int failed = 0;
    for (auto& n : names) {
        Result r;
        try {
            r = suite.run(n);
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return 2;
        }
        std::cout << line(r) << std::endl;
        failed += !r.passed;
        all.push_back(to_json(r));
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << names.size() - size_t(failed) << "/" << names.size() << std::endl;
    if (!json_out.empty()) std::ofstream(json_out) << all.dump(2) << "\n";
    return failed ? 1 : 0;
}
