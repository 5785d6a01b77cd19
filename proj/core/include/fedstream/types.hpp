#pragma once

#include <cstdint>
#include <string>

namespace fedstream {

// Two-class problem. Ordinal encoding is part of the wire format and
// must never change: benign=0, malicious=1.
enum class ClassLabel : uint8_t {
  benign = 0,
  malicious = 1,
};

inline const char* to_string(ClassLabel y) {
  return y == ClassLabel::benign ? "benign" : "malicious";
}

// Per-class scores as produced by a classifier. Scales differ per model
// family (NB scores are unnormalized posterior values, MLP/forest scores
// sum to 1); thresholding downstream uses the malicious ratio.
struct ClassScores {
  double benign = 0.0;
  double malicious = 0.0;

  // Ties go to benign.
  ClassLabel predicted() const {
    return malicious > benign ? ClassLabel::malicious : ClassLabel::benign;
  }

  // malicious / (benign + malicious); 0.5 when both scores are zero.
  double malicious_ratio() const {
    const double s = benign + malicious;
    return s > 0.0 ? malicious / s : 0.5;
  }
};

enum class ModelKind : uint8_t {
  mlp = 0,
  nb = 1,
  forest = 2,
};

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::mlp: return "mlp";
    case ModelKind::nb: return "nb";
    case ModelKind::forest: return "forest";
  }
  return "?";
}

bool model_kind_from_string(const std::string& s, ModelKind& out);
bool class_label_from_string(const std::string& s, ClassLabel& out);

}  // namespace fedstream
