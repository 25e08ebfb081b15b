#ifndef HYPSTAB_CLI_HPP
#define HYPSTAB_CLI_HPP

namespace hypstab {

/// Subcommand dispatch (synth | simulate | verify | sweep).
/// Exit codes: 0 ok, 1 verdict failure, 2 usage or schema error.
int cli_main(int argc, const char* const* argv);

} // namespace hypstab

#endif
