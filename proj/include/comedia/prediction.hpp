#pragma once

#include "comedia/gender.hpp"

#include <array>

namespace comedia {

/// Two-class classifier output; index 0 is Male, 1 is Female.
struct Prediction {
    std::array<double, 2> logits{};
    std::array<double, 2> probs{0.5, 0.5};
    Gender label = Gender::Male;
    double confidence = 0.5;
};

/// Numerically stable softmax; exact ties resolve to Male.
Prediction prediction_from_logits(const std::array<double, 2>& logits);

/// Builds a Prediction straight from probabilities (tests, fixtures).
Prediction prediction_from_probs(double male, double female);

}  // namespace comedia
