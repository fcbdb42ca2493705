// Writes deterministic random-weight NNWA archives, or prints a network's
// tensor manifest. Useful for smoke runs before real weights are exported.
#include <CLI11.hpp>
#include <iostream>

#include "storewatch/demographics.hpp"
#include "storewatch/error.hpp"
#include "storewatch/expression.hpp"
#include "storewatch/weights_io.hpp"

int main(int argc, char** argv) {
  using namespace storewatch;
  CLI::App app{"Random-weight archive generator", "storewatch-weights"};
  std::string network, out;
  std::uint64_t seed = 0;
  bool manifest_only = false;
  app.add_option("--network", network, "wrn or xception")->required()->check(CLI::IsMember({"wrn", "xception"}));
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--out", out, "Output NNWA file");
  app.add_flag("--manifest", manifest_only, "Print tensor names and shapes instead of writing weights");
  CLI11_PARSE(app, argc, argv);

  const auto manifest = network == "wrn" ? demographics::wrn_manifest() : expression::xception_manifest();
  if (manifest_only) {
    for (const auto& e : manifest) std::cout << e.name << ' ' << shape_to_string(e.dims) << '\n';
    return 0;
  }
  if (out.empty()) {
    std::cerr << "error: --out is required unless --manifest is given\n";
    return 1;
  }
  try {
    weights::save_archive(weights::random_archive(manifest, seed), out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
