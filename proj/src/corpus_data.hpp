#pragma once

#include <string_view>
#include <vector>

namespace reward_audit::detail {

struct EmbeddedDocument {
    std::string_view filename;
    std::string_view text;
};

/// Corpus documents compiled into the library, sorted by filename.
const std::vector<EmbeddedDocument>& embedded_documents();

}  // namespace reward_audit::detail
