#include "mffnc/metrics.hpp"

#include <cstdio>

#include "mffnc/error.hpp"

namespace mffnc {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix compute_confusion(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw UsageError("predictions (" + std::to_string(predictions.size()) + ") and labels (" +
                         std::to_string(labels.size()) + ") differ in length");
    if (predictions.empty()) throw UsageError("cannot build a confusion matrix from zero samples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int p = predictions[i];
        const int y = labels[i];
        if ((p != 0 && p != 1) || (y != 0 && y != 1))
            throw UsageError("sample " + std::to_string(i) + " has a value outside {0, 1}");
        if (p == 1)
            (y == 1 ? cm.tp : cm.fp)++;
        else
            (y == 0 ? cm.tn : cm.fn)++;
    }
    return cm;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw UsageError("metrics of an empty confusion matrix are undefined");
    MetricsReport r;
    r.confusion = cm;
    r.accuracy = ratio(cm.tp + cm.tn, cm.total());
    r.precision = ratio(cm.tp, cm.tp + cm.fp);
    r.recall = ratio(cm.tp, cm.tp + cm.fn);
    const double denom = r.precision + r.recall;
    r.f1 = denom == 0.0 ? 0.0 : 2.0 * (r.precision * r.recall) / denom;
    return r;
}

std::string metrics_to_json(const MetricsReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "{\"accuracy\":%.6f,\"precision\":%.6f,\"recall\":%.6f,\"f1\":%.6f,"
                  "\"confusion\":{\"tp\":%zu,\"tn\":%zu,\"fp\":%zu,\"fn\":%zu}}\n",
                  r.accuracy, r.precision, r.recall, r.f1, r.confusion.tp, r.confusion.tn, r.confusion.fp,
                  r.confusion.fn);
    return buf;
}

}  // namespace mffnc
