#pragma once

// Fixed instruction texts. These are compared byte-for-byte against golden
// files; do not reflow.

#include <string_view>

namespace ras::prompts {

inline constexpr std::string_view kPlanInstruction =
    "You are a planner to determine if the question can be answered with "
    "current information and output the appropriate label as well as the "
    "subquery if needed.\n"
    "Output [NO_RETRIEVAL] if the question can be directly answered with the "
    "question itself without any retrieval.\n"
    "Output [SUBQ] with an subquery for retrieval if still needs a subquery.\n"
    "Output [SUFFICIENT] if the question can be answered with the provided "
    "information.";

inline constexpr std::string_view kAnswerInstruction =
    "You are an answerer given a question and retrieved graph information.\n"
    "Each [SUBQ] is a subquery we generated through reasoning for the "
    "question. The retrieved graph information follows each [SUBQ] is "
    "relevant graph information we retrieved to answer the subquery.\n"
    "[NO_RETRIEVAL] means the question can be answered with the question "
    "itself without any retrieval.\n"
    "The main question starts with \"Question: \". Please answer the "
    "question, with subqueries and retrieved graph information if they are "
    "helpful.";

// Task-specific instruction rows used at inference time.
inline constexpr std::string_view kArcChallengeInstruction =
    "Which is true? Output A, B, C, or D.";
inline constexpr std::string_view kPubHealthInstruction =
    "Is statement 'true' or 'false'? Only output 'true' or 'false'.";
inline constexpr std::string_view kAsqaInstruction =
    "Answer the following question. The question may be ambiguous and have "
    "multiple correct answers, and in that case, you have to provide a "
    "long-form answer including all correct answers. [Long Form]";
inline constexpr std::string_view kEli5Instruction =
    "Provide a paragraph-length response using simple words to answer the "
    "following question. [Long Form]";

// Supporting-document filter prompt; [question] and [enumerated_documents]
// are substituted.
inline constexpr std::string_view kFilterPrompt =
    R"(Identify which documents are HELPFUL to answer the question. Output only the document numbers separated by commas.

Examples:

Example 1 (Some documents are not helpful):
Question: What nationality was James Henry Miller's wife?
Supporting docs:
1. Margaret "Peggy" Seeger (born June 17, 1935) is an American folksinger. She is also well known in Britain, where she has lived for more than 30 years, and was married to the singer and songwriter Ewan MacColl until his death in 1989.
2. Seeger's father was Charles Seeger (1886-1979), an important folklorist and musicologist; her mother was Seeger's second wife, Ruth Porter Crawford.
3. James Henry Miller, better known by his stage name Ewan MacColl, was an English folk singer and songwriter.
Output: 1,3
Explanation: Only docs 1 and 3 are helpful - doc 1 shows Peggy Seeger (who is American) was married to Ewan MacColl, and doc 3 confirms Ewan MacColl is James Henry Miller. Doc 2 about Seeger's parents is not helpful.

Example 2 (All documents are helpful):
Question: The Oberoi family is part of a hotel company that has a head office in what city?
Supporting docs:
1. The Oberoi family is an Indian family that is famous for its involvement in hotels, namely through The Oberoi Group.
2. The Oberoi Group is a hotel company with its head office in Delhi.
Output: 1,2
Explanation: Both docs are helpful - doc 1 links the Oberoi family to The Oberoi Group, and doc 2 provides the head office location.

Question: [question]
Supporting docs: 
[enumerated_documents]

Output only the helpful document numbers separated by commas:)";

// Sub-query generation prompt pieces; the previous-queries block is only
// emitted when earlier sub-queries exist.
inline constexpr std::string_view kSubqueryPromptHead =
    "Given this main question and a supporting document, generate a simple "
    "sub-query (a question) that will help retrieve information from the "
    "document to answer the main question.\n\n"
    "Main Question: ";
inline constexpr std::string_view kSubqueryPreviousHeader =
    "Previously generated sub-queries:\n";
inline constexpr std::string_view kSubqueryPromptTail =
    "\nWrite ONE clear and specific question that:\n"
    "1. Can be answered using ONLY this document\n"
    "2. Helps retrieve information needed for the main question\n"
    "3. Is direct and focused on key information from this document\n\n"
    "Write only the question, without any explanations or formatting.";

} // namespace ras::prompts
