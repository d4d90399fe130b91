#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bvae::app {

/// Entry point for the `bridgevae` tool. Subcommands: gen-data, train, embed,
/// centroids, morph, sample-boundary, hist, scatter, export-montage, serve,
/// decode. Returns 0 on success, 2 on usage errors, 1 on runtime failures.
int cli_main(int argc, const char* const* argv);

/// Same, with explicit argument list (argv[0] excluded) and output streams.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bvae::app
