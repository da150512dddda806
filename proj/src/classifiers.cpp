#include "genfeat/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "genfeat/errors.hpp"
#include "genfeat/losses.hpp"
#include "genfeat/metrics.hpp"

namespace genfeat {

namespace {

void check_range(bool ok, const std::string& what) {
  if (!ok) throw DataError("classifier: " + what);
}

bool is_recurrent(ClassifierKind k) {
  return k == ClassifierKind::Lstm || k == ClassifierKind::Bilstm ||
         k == ClassifierKind::BilstmAttention;
}

void check_doc(const Tensor& d, const ClassifierSpec& s, const char* what) {
  if (d.shape() != std::vector<std::size_t>{s.input_len, s.input_dim})
    throw DataError(std::string(what) + ": expected document shape [" +
                    std::to_string(s.input_len) + "," + std::to_string(s.input_dim) + "]");
}

Tensor stack_docs(const std::vector<Tensor>& docs, const std::vector<std::size_t>& order,
                  std::size_t offset, std::size_t n, const ClassifierSpec& s) {
  Tensor x({n, s.input_len, s.input_dim});
  const std::size_t stride = s.input_len * s.input_dim;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& d = docs[order[offset + i]];
    std::copy(d.data(), d.data() + stride, x.data() + i * stride);
  }
  return x;
}

Tensor one_hot(const std::vector<int>& labels, const std::vector<std::size_t>& order,
               std::size_t offset, std::size_t n, std::size_t classes) {
  Tensor t({n, classes});
  for (std::size_t i = 0; i < n; ++i)
    t.data()[i * classes + static_cast<std::size_t>(labels[order[offset + i]])] = 1.0;
  return t;
}

// One stacked hidden block after another, dropout between blocks and on the
// vector entering the softmax head. `init_rng` only matters on the first
// call, when it materializes the parameters.
Var forward_impl(Classifier& m, const Var& x, Mode mode, Rng& init_rng, Rng& drop_rng) {
  const ClassifierSpec& s = m.spec;
  if (x.value().shape().size() != 3 || x.value().shape()[1] != s.input_len ||
      x.value().shape()[2] != s.input_dim)
    throw DataError("classifier_forward: expected input [N," + std::to_string(s.input_len) +
                    "," + std::to_string(s.input_dim) + "]");
  auto drop = [&](const Var& v) { return dropout(v, s.dropout_rate, mode, drop_rng); };
  ParamStore& p = m.params;

  switch (s.kind) {
    case ClassifierKind::Lstm: {
      Var h = x;
      std::size_t in = s.input_dim;
      LstmOut o;
      for (std::size_t i = 0; i < s.hidden_layers; ++i) {
        o = lstm(p, "clf/lstm" + std::to_string(i), h, in, s.units, init_rng);
        if (i + 1 < s.hidden_layers) h = drop(o.sequence);
        in = s.units;
      }
      return dense(p, "clf/out", drop(o.final_state), s.units, s.classes,
                   Activation::Softmax, init_rng);
    }
    case ClassifierKind::Bilstm: {
      Var h = x;
      std::size_t in = s.input_dim;
      LstmOut o;
      for (std::size_t i = 0; i < s.hidden_layers; ++i) {
        o = bidirectional_lstm(p, "clf/bilstm" + std::to_string(i), h, in, s.units, init_rng);
        if (i + 1 < s.hidden_layers) h = drop(o.sequence);
        in = 2 * s.units;
      }
      return dense(p, "clf/out", drop(o.final_state), 2 * s.units, s.classes,
                   Activation::Softmax, init_rng);
    }
    case ClassifierKind::BilstmAttention: {
      Var h = x;
      std::size_t in = s.input_dim;
      for (std::size_t i = 0; i < s.hidden_layers; ++i) {
        LstmOut o = bidirectional_lstm(p, "clf/bilstm" + std::to_string(i), h, in, s.units,
                                       init_rng);
        h = drop(o.sequence);
        in = 2 * s.units;
      }
      Var a = multi_head_attention(p, "clf/attn", h, 2 * s.units, s.heads, init_rng);
      Var pooled = global_avg_pool1d(a);
      return dense(p, "clf/out", drop(pooled), 2 * s.units, s.classes, Activation::Softmax,
                   init_rng);
    }
    case ClassifierKind::Cnn: {
      Var h = x;
      std::size_t in = s.input_dim;
      for (std::size_t i = 0; i < 4; ++i) {
        Var c = conv1d(p, "clf/conv" + std::to_string(i), h, in, s.conv_filters[i],
                       s.conv_kernels[i], 1, Activation::Elu, init_rng);
        h = drop(max_pool1d(c));
        in = s.conv_filters[i];
      }
      return dense(p, "clf/out", global_avg_pool1d(h), in, s.classes, Activation::Softmax,
                   init_rng);
    }
    case ClassifierKind::Clstm: {
      Var h = x;
      std::size_t in = s.input_dim;
      for (std::size_t i = 0; i < 3; ++i) {
        Var c = conv1d(p, "clf/conv" + std::to_string(i), h, in, s.conv_filters[i],
                       s.conv_kernels[i], 1, Activation::Elu, init_rng);
        h = drop(max_pool1d(c));
        in = s.conv_filters[i];
      }
      LstmOut o;
      for (std::size_t i = 0; i < s.lstm_units.size(); ++i) {
        o = lstm(p, "clf/lstm" + std::to_string(i), h, in, s.lstm_units[i], init_rng);
        if (i + 1 < s.lstm_units.size()) h = drop(o.sequence);
        in = s.lstm_units[i];
      }
      return dense(p, "clf/out", drop(o.final_state), in, s.classes, Activation::Softmax,
                   init_rng);
    }
  }
  throw DataError("classifier_forward: unknown kind");
}

Prediction predict_row(const Tensor& probs, std::size_t row, std::size_t classes) {
  Prediction out;
  out.probs.resize(classes);
  const real* base = probs.data() + row * classes;
  for (std::size_t c = 0; c < classes; ++c) out.probs[c] = base[c];
  out.label = static_cast<int>(
      std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
  return out;
}

}  // namespace

void ClassifierSpec::validate(bool enforce_ranges) const {
  check_range(input_len > 0 && input_dim > 0, "input dimensions must be positive");
  check_range(classes >= 2, "needs at least two classes");
  check_range(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout rate must be in [0,1)");
  if (is_recurrent(kind)) {
    check_range(hidden_layers > 0 && units > 0, "recurrent depth and width must be positive");
    if (enforce_ranges) {
      check_range(hidden_layers >= 4 && hidden_layers <= 8,
                  "hidden layer count must be between 4 and 8");
      check_range(units >= 32 && units <= 256, "units per layer must be between 32 and 256");
    }
  }
  if (kind == ClassifierKind::BilstmAttention)
    check_range(heads > 0 && (2 * units) % heads == 0,
                "attention heads must divide the bidirectional width");
  if (kind == ClassifierKind::Cnn || kind == ClassifierKind::Clstm) {
    const std::size_t stages = kind == ClassifierKind::Cnn ? 4 : 3;
    check_range(conv_filters.size() >= stages && conv_kernels.size() >= stages,
                "needs " + std::to_string(stages) + " conv filter and kernel entries");
    for (std::size_t i = 0; i < stages; ++i) {
      check_range(conv_filters[i] > 0, "conv filters must be positive");
      check_range(conv_kernels[i] > 0 && conv_kernels[i] <= kMaxKernelWidth,
                  "conv kernels must be between 1 and " + std::to_string(kMaxKernelWidth));
      if (enforce_ranges)
        check_range(conv_filters[i] <= 512, "conv filters must be at most 512");
    }
  }
  if (kind == ClassifierKind::Clstm) {
    check_range(lstm_units.size() == 4, "needs exactly four stacked recurrent widths");
    for (std::size_t u : lstm_units) {
      check_range(u > 0, "recurrent widths must be positive");
      if (enforce_ranges)
        check_range(u >= 32 && u <= 256, "recurrent widths must be between 32 and 256");
    }
  }
}

Classifier build_classifier(const ClassifierSpec& spec, std::uint64_t seed,
                            bool enforce_ranges) {
  spec.validate(enforce_ranges);
  Classifier m;
  m.spec = spec;
  // One throwaway forward materializes every parameter in a fixed order, so
  // (spec, seed) fully determines the initialization.
  Rng rng(stage_seed(seed, "clf/init"));
  Rng scratch(0);
  forward_impl(m, Var(Tensor({1, spec.input_len, spec.input_dim})), Mode::Infer, rng, scratch);
  return m;
}

Var classifier_forward(Classifier& model, const Var& x, Mode mode, Rng* dropout_rng) {
  if (mode == Mode::Train && model.spec.dropout_rate > 0.0 && dropout_rng == nullptr)
    throw DataError("classifier_forward: train mode with dropout needs an rng");
  Rng scratch(0);  // parameters already exist; never consumed
  return forward_impl(model, x, mode, scratch, dropout_rng ? *dropout_rng : scratch);
}

std::size_t classifier_param_count(const Classifier& model) {
  std::size_t total = 0;
  for (const std::string& name : model.params.trainable_names())
    total += model.params.param(name).value().numel();
  return total;
}

Prediction classify(Classifier& model, const Tensor& x) {
  check_doc(x, model.spec, "classify");
  Tensor batched({1, model.spec.input_len, model.spec.input_dim},
                 std::vector<real>(x.data(), x.data() + x.numel()));
  Var probs = classifier_forward(model, Var(std::move(batched)), Mode::Infer);
  return predict_row(probs.value(), 0, model.spec.classes);
}

std::vector<Prediction> classify_batch(Classifier& model, const std::vector<Tensor>& xs) {
  for (const Tensor& x : xs) check_doc(x, model.spec, "classify_batch");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Prediction> out;
  out.reserve(xs.size());
  // Rows are independent in every kind, so chunking only bounds memory.
  const std::size_t chunk = 64;
  for (std::size_t off = 0; off < xs.size(); off += chunk) {
    const std::size_t n = std::min(chunk, xs.size() - off);
    Var probs = classifier_forward(model, Var(stack_docs(xs, order, off, n, model.spec)),
                                   Mode::Infer);
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(predict_row(probs.value(), i, model.spec.classes));
  }
  return out;
}

ClassifierHistory train_classifier(Classifier& model, const std::vector<Tensor>& train_x,
                                   const std::vector<int>& train_y,
                                   const std::vector<Tensor>& val_x,
                                   const std::vector<int>& val_y,
                                   const ClassifierTrainConfig& tc, std::uint64_t seed) {
  const ClassifierSpec& s = model.spec;
  if (train_x.empty()) throw DataError("train_classifier: training set is empty");
  if (val_x.empty()) throw DataError("train_classifier: validation set is empty");
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size())
    throw DataError("train_classifier: documents and labels must pair up");
  if (tc.epochs == 0 || tc.batch == 0)
    throw DataError("train_classifier: epochs and batch must be positive");
  if (!(tc.lr > 0.0)) throw DataError("train_classifier: learning rate must be positive");
  if (tc.patience == 0) throw DataError("train_classifier: patience must be positive");
  if (tc.class_weights && tc.class_weights->size() != s.classes)
    throw DataError("train_classifier: expected one class weight per class");
  if (tc.class_weights)
    for (real w : *tc.class_weights)
      if (!(w > 0.0) || !std::isfinite(w))
        throw DataError("train_classifier: class weights must be positive and finite");
  for (const Tensor& d : train_x) check_doc(d, s, "train_classifier");
  for (const Tensor& d : val_x) check_doc(d, s, "train_classifier");
  std::vector<std::size_t> seen_class(s.classes, 0);
  for (int y : train_y) {
    if (y < 0 || static_cast<std::size_t>(y) >= s.classes)
      throw DataError("train_classifier: training label out of range");
    ++seen_class[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < s.classes; ++c)
    if (seen_class[c] == 0)
      throw DataError("train_classifier: class " + std::to_string(c) +
                      " is absent from the training set");
  for (int y : val_y)
    if (y < 0 || static_cast<std::size_t>(y) >= s.classes)
      throw DataError("train_classifier: validation label out of range");

  Rng shuffle_rng(stage_seed(seed, "clf/shuffle"));
  Rng drop_rng(stage_seed(seed, "clf/dropout"));
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);

  ClassifierHistory hist;
  hist.best_val_recall = -1.0;
  std::map<std::string, Tensor> best_params = model.params.snapshot();
  std::vector<int> truth(val_y.begin(), val_y.end());
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t off = 0; off < train_x.size(); off += tc.batch) {
      const std::size_t n = std::min(tc.batch, train_x.size() - off);
      Var x(stack_docs(train_x, order, off, n, s));
      Var probs = classifier_forward(model, x, Mode::Train, &drop_rng);
      Var loss = categorical_cross_entropy(probs, one_hot(train_y, order, off, n, s.classes),
                                           tc.class_weights);
      auto grads = gradients(loss, model.params);
      adam_step(model.params, grads, tc.lr);
      sum += loss.value().data()[0] * static_cast<double>(n);
      seen += n;
    }
    hist.train_loss.push_back(sum / static_cast<double>(seen));

    std::vector<Prediction> preds = classify_batch(model, val_x);
    std::vector<int> labels(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) labels[i] = preds[i].label;
    const double recall = macro_prf(confusion_matrix(truth, labels, s.classes)).macro.recall;
    hist.val_recall.push_back(recall);

    if (recall > hist.best_val_recall) {
      hist.best_val_recall = recall;
      hist.best_epoch = epoch;
      best_params = model.params.snapshot();
    } else if (epoch - hist.best_epoch >= tc.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  model.params.load_values(best_params);
  model.trained = true;
  return hist;
}

std::size_t select_best(const std::vector<Classifier>& models,
                        const std::vector<double>& val_recalls) {
  if (models.empty()) throw DataError("select_best: no candidates");
  if (models.size() != val_recalls.size())
    throw DataError("select_best: one recall per candidate required");
  std::size_t best = 0;
  std::size_t best_count = classifier_param_count(models[0]);
  for (std::size_t i = 1; i < models.size(); ++i) {
    const std::size_t count = classifier_param_count(models[i]);
    if (val_recalls[i] > val_recalls[best] ||
        (val_recalls[i] == val_recalls[best] && count < best_count)) {
      best = i;
      best_count = count;
    }
  }
  return best;
}

}  // namespace genfeat
