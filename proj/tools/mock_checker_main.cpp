#include <iostream>

#include "proofgate/mock_checker.hpp"

int main() {
    std::ios::sync_with_stdio(false);
    try {
        return proofgate::run_mock_checker(std::cin, std::cout, proofgate::MockConfig::from_env());
    } catch (const std::exception& e) {
        std::cerr << "mock-checker: " << e.what() << "\n";
        return 1;
    }
}
