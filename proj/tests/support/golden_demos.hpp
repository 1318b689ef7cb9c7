#pragma once

#include "fixtures.hpp"

#include "priorpull/sampling.hpp"

#include <vector>

namespace fixtures {

// The demonstrations and query frozen into tests/golden/prompt_*shot_json.txt.
inline std::vector<Demonstration> golden_demos() {
    const auto t = semeval_taxonomy();
    auto set = [&](std::vector<std::string> names) { return make_label_set(t, names); };
    return {
        {"g1", "Just got the keys to our first house!!", set({"joy", "optimism"})},
        {"g2", "Another delay on the train, unbelievable", set({"anger", "disgust"})},
        {"g3", "Meeting moved to 3pm.", set({})},
        {"g4", "Can't wait for the finals next week", set({"anticipation", "optimism"})},
        {"g5", "I miss you so much grandpa", set({"love", "sadness"})},
    };
}

inline LabeledExample golden_query() {
    const auto t = semeval_taxonomy();
    return {"gq", "The results come out tomorrow and I'm terrified", make_label_set(t, std::vector<std::string>{"fear"})};
}

} // namespace fixtures
