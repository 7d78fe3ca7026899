#include "comedia/prediction.hpp"

#include <algorithm>
#include <cmath>

namespace comedia {

Prediction prediction_from_logits(const std::array<double, 2>& logits) {
    Prediction p;
    p.logits = logits;
    const double top = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - top);
    const double e1 = std::exp(logits[1] - top);
    const double z = e0 + e1;
    p.probs = {e0 / z, e1 / z};
    p.label = logits[1] > logits[0] ? Gender::Female : Gender::Male;
    p.confidence = p.probs[class_index(p.label)];
    return p;
}

Prediction prediction_from_probs(double male, double female) {
    Prediction p;
    p.probs = {male, female};
    p.logits = {std::log(male), std::log(female)};
    p.label = female > male ? Gender::Female : Gender::Male;
    p.confidence = p.probs[class_index(p.label)];
    return p;
}

}  // namespace comedia
