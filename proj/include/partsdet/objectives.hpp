#ifndef PARTSDET_OBJECTIVES_HPP
#define PARTSDET_OBJECTIVES_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/mask_pipeline.hpp"
#include "partsdet/model.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

template <typename T>
T logistic(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

// Binary cross-entropy from logits: max(z,0) - z*t + log(1 + exp(-|z|)).
template <typename T>
T stable_bce(T z, T t) {
  return std::max(z, T(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
}

enum class MaskReduction { Sum, Mean };

// Per-pixel BCE between a logit map and its soft mask target, reduced by
// summation over pixels (default) or by the per-pixel mean.
template <typename T>
T mask_loss(const Grid<T>& logits, const GridF& target,
            MaskReduction red = MaskReduction::Sum) {
  if (logits.h != target.h || logits.w != target.w)
    throw input_error("mask_loss: map/target shape mismatch");
  T acc = 0;
  for (size_t i = 0; i < logits.v.size(); ++i)
    acc += stable_bce(logits.v[i], T(target.v[i]));
  if (red == MaskReduction::Mean) acc /= T(logits.v.size());
  return acc;
}

template <typename T>
Grid<T> mask_loss_grad(const Grid<T>& logits, const GridF& target,
                       MaskReduction red = MaskReduction::Sum) {
  if (logits.h != target.h || logits.w != target.w)
    throw input_error("mask_loss_grad: map/target shape mismatch");
  Grid<T> g(logits.h, logits.w);
  const T scale =
      red == MaskReduction::Mean ? T(1) / T(logits.v.size()) : T(1);
  for (size_t i = 0; i < logits.v.size(); ++i)
    g.v[i] = scale * (logistic(logits.v[i]) - T(target.v[i]));
  return g;
}

template <typename T>
T class_loss(T yhat, int y) {
  if (!std::isfinite(double(yhat)))
    throw input_error("class_loss: non-finite logit");
  return stable_bce(yhat, T(y));
}

template <typename T>
T class_loss_grad(T yhat, int y) {
  return logistic(yhat) - T(y);
}

template <typename T>
struct Prediction {
  std::vector<T> pooled;  // spatial mean per part
  T aggregate = 0;
  T yhat = 0;
  T score = 0;  // logistic(yhat)
  int argmax_part = 0;
};

template <typename T>
T spatial_mean(const Grid<T>& g) {
  T acc = 0;
  for (T v : g.v) acc += v;
  return acc / T(g.v.size());
}

// Pool each part map to a scalar, aggregate, and classify. For mean/max the
// classifier is a scalar affine on the aggregate; for fc the affine over the
// pooled vector IS the classifier; ensemble averages per-member logits.
template <typename T>
Prediction<T> classify(const std::vector<Grid<T>>& maps, Aggregation agg,
                       const std::vector<T>& w, const std::vector<T>& b) {
  if (maps.empty()) throw config_error("classify: no part maps");
  const size_t P = maps.size();
  Prediction<T> pred;
  for (const auto& m : maps) pred.pooled.push_back(spatial_mean(m));

  switch (agg) {
    case Aggregation::Mean: {
      if (w.size() != 1 || b.size() != 1)
        throw config_error("classify: mean aggregation needs a 1x1 classifier");
      T s = 0;
      for (T v : pred.pooled) s += v;
      pred.aggregate = s / T(P);
      pred.yhat = w[0] * pred.aggregate + b[0];
      break;
    }
    case Aggregation::Max: {
      if (w.size() != 1 || b.size() != 1)
        throw config_error("classify: max aggregation needs a 1x1 classifier");
      pred.argmax_part = 0;
      for (size_t p = 1; p < P; ++p)
        if (pred.pooled[p] > pred.pooled[pred.argmax_part])
          pred.argmax_part = int(p);
      pred.aggregate = pred.pooled[pred.argmax_part];
      pred.yhat = w[0] * pred.aggregate + b[0];
      break;
    }
    case Aggregation::Fc: {
      if (w.size() != P || b.size() != 1)
        throw config_error("classify: fc classifier size must match parts");
      T s = b[0];
      for (size_t p = 0; p < P; ++p) s += w[p] * pred.pooled[p];
      pred.aggregate = s;
      pred.yhat = s;
      break;
    }
    case Aggregation::Ensemble: {
      if (w.size() != P || b.size() != P)
        throw config_error("classify: ensemble needs one classifier per part");
      T s = 0;
      for (size_t p = 0; p < P; ++p) s += w[p] * pred.pooled[p] + b[p];
      pred.aggregate = s / T(P);
      pred.yhat = pred.aggregate;
      break;
    }
  }
  pred.score = logistic(pred.yhat);
  return pred;
}

// Accumulates d(yhat)/d(everything): classifier grads and per-map grads.
// dmaps entries must already be sized like the maps; contributions add.
template <typename T>
void classify_backward(const std::vector<Grid<T>>& maps,
                       const Prediction<T>& pred, Aggregation agg,
                       const std::vector<T>& w, T dyhat, std::vector<T>& dw,
                       std::vector<T>& db, std::vector<Grid<T>>& dmaps) {
  const size_t P = maps.size();
  std::vector<T> dpooled(P, T(0));
  switch (agg) {
    case Aggregation::Mean:
      dw[0] += dyhat * pred.aggregate;
      db[0] += dyhat;
      for (size_t p = 0; p < P; ++p) dpooled[p] = dyhat * w[0] / T(P);
      break;
    case Aggregation::Max:
      dw[0] += dyhat * pred.aggregate;
      db[0] += dyhat;
      dpooled[pred.argmax_part] = dyhat * w[0];
      break;
    case Aggregation::Fc:
      db[0] += dyhat;
      for (size_t p = 0; p < P; ++p) {
        dw[p] += dyhat * pred.pooled[p];
        dpooled[p] = dyhat * w[p];
      }
      break;
    case Aggregation::Ensemble:
      for (size_t p = 0; p < P; ++p) {
        dw[p] += dyhat * pred.pooled[p] / T(P);
        db[p] += dyhat / T(P);
        dpooled[p] = dyhat * w[p] / T(P);
      }
      break;
  }
  for (size_t p = 0; p < P; ++p) {
    const T g = dpooled[p] / T(maps[p].v.size());
    for (size_t i = 0; i < dmaps[p].v.size(); ++i) dmaps[p].v[i] += g;
  }
}

template <typename T>
struct LossBreakdown {
  std::vector<T> mask_losses;  // one per configured part
  T class_value = 0;
  T total = 0;
  T lambda = 10;
};

// Single- and multi-part totals: class loss plus lambda times the sum of the
// per-part mask losses. Real images pass the all-zero mask set.
template <typename T>
LossBreakdown<T> total_loss(const std::vector<Grid<T>>& maps,
                            const std::vector<RegionId>& parts,
                            const RegionMaskSet& targets, T yhat, int y,
                            T lambda,
                            MaskReduction red = MaskReduction::Sum) {
  if (maps.size() != parts.size())
    throw input_error("total_loss: maps/parts mismatch");
  LossBreakdown<T> out;
  out.lambda = lambda;
  out.class_value = class_loss(yhat, y);
  out.total = out.class_value;
  for (size_t p = 0; p < parts.size(); ++p) {
    const T ml = mask_loss(maps[p], targets.of(parts[p]), red);
    out.mask_losses.push_back(ml);
    out.total += lambda * ml;
  }
  return out;
}

}  // namespace partsdet

#endif
