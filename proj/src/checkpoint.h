#ifndef MORSEM_CHECKPOINT_H
#define MORSEM_CHECKPOINT_H

#include <map>
#include <string>

#include "char_retrofit.h"
#include "joint.h"

namespace morsem {

// On-disk bundle for a trained joint model: all parameter blocks, both
// feature indices, both proposal distributions, and a free-form key-value
// config echo for audit. The format is version-tagged line-oriented text;
// doubles carry 17 significant digits, so save -> load -> save reproduces
// the file byte for byte.
//
// The stem embedding table is deliberately not bundled (it is a frozen
// external input): after loading, reattach it with
// params.morphemes.set_stem_table(...) using the table named by the config.
struct JointCheckpoint {
  JointParams params;
  JointProposals proposals;
  std::map<std::string, std::string> config;
};

// Config keys must be nonempty and neither keys nor values may contain tab
// or newline bytes (UsageError otherwise). Write failures raise DataError.
void SaveJointCheckpoint(const JointCheckpoint& ckpt, const std::string& path);

// Strict reader: version, block order, counts, and shapes are all checked;
// malformed input raises DataError with the offending line number.
JointCheckpoint LoadJointCheckpoint(const std::string& path);

// Same container format for the character-level baseline.
void SaveCharRetrofitCheckpoint(const CharRetrofitModel& model,
                                const std::map<std::string, std::string>& config,
                                const std::string& path);
CharRetrofitModel LoadCharRetrofitCheckpoint(
    const std::string& path,
    std::map<std::string, std::string>* config = nullptr);

}  // namespace morsem

#endif
