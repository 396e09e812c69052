#pragma once

#include <string>
#include <vector>

#include "ecorank/domain.hpp"

namespace ecorank {

// Turns a model completion into a full permutation of `candidate_ids`.
//
// Extraction order: (1) the first JSON array in the text whose entries
// resolve as 1-based candidate indices or ids; (2) otherwise numbered-list
// lines "k. <entry>", resolved as index, exact id, then exact label match
// (labels are the rendered candidate texts shown in the prompt; matching
// by label is skipped when `candidate_labels` is empty).
//
// Repair then makes the result total: unknown and duplicate entries are
// dropped, missing candidates are appended in candidate-set order, and
// `repaired` is set iff any rule fired. Throws Unparseable only when not a
// single entry could be extracted.
RankedList parse_ranked_list(const std::string& text,
                             const std::vector<std::string>& candidate_ids,
                             const std::vector<std::string>& candidate_labels = {});

// Content strictly between the first start_tag and the next end_tag after
// it, whitespace-trimmed. Throws TagNotFound when missing or misordered.
std::string extract_tagged(const std::string& text, const std::string& start_tag = "<START>",
                           const std::string& end_tag = "<END>");

// Every <START>...<END> block in order; falls back to numbered-list lines
// when there are no tagged blocks. Exact duplicates are dropped, first
// occurrence wins. Throws NoVariants when nothing remains.
std::vector<std::string> parse_variants(const std::string& text,
                                        const std::string& start_tag = "<START>",
                                        const std::string& end_tag = "<END>");

}  // namespace ecorank
