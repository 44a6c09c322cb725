// Stand-in external proposer. The behaviour is fixed at build time because
// the lab starts proposers without arguments.
#include <chrono>
#include <iostream>
#include <json.hpp>
#include <string>
#include <thread>

int main() {
  std::string line;
  while (std::getline(std::cin, line)) {
    const auto req = nlohmann::json::parse(line);
#if defined(PROPOSER_ECHO)
    std::cout << nlohmann::json{{"expr_text", req["parents"][0]["expr_text"]}}.dump() << std::endl;
#elif defined(PROPOSER_GARBAGE)
    std::cout << R"({"expr_text":"not-an-expr"})" << std::endl;
#elif defined(PROPOSER_REFUSE)
    std::cout << R"({"error":"no idea"})" << std::endl;
#elif defined(PROPOSER_OVER_BUDGET)
    std::string e = "x";
    for (int i = 0; i < 10; ++i) e = "(gelu " + e + ")";
    std::cout << nlohmann::json{{"expr_text", e}}.dump() << std::endl;
#elif defined(PROPOSER_SILENT)
    (void)req;
    std::this_thread::sleep_for(std::chrono::seconds(30));
#elif defined(PROPOSER_NOT_JSON)
    (void)req;
    std::cout << "hello" << std::endl;
#elif defined(PROPOSER_EXIT)
    (void)req;
    return 3;
#else
#error "pick a behaviour"
#endif
  }
  return 0;
}
