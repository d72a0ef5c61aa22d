#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace mffnc {

// Binary confusion counts; the positive class is depressed (label 1).
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    ConfusionMatrix confusion;
};

// Throws UsageError on length mismatch, empty input or labels outside {0,1}.
ConfusionMatrix compute_confusion(std::span<const int> predictions, std::span<const int> labels);

// accuracy = (tp+tn)/total, precision = tp/(tp+fp), recall = tp/(tp+fn),
// f1 = 2pr/(p+r). A zero denominator yields 0 for that metric. Throws
// UsageError when the matrix is empty.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

// {"accuracy":x,"precision":x,"recall":x,"f1":x,"confusion":{"tp":n,...}}
// with six decimal places, no whitespace, trailing newline.
std::string metrics_to_json(const MetricsReport& report);

}  // namespace mffnc
