#pragma once

#include <vector>

#include "aoi/error.hpp"
#include "aoi/types.hpp"

namespace aoi {

/// Decoder-side memory of one agent. `age` is zero exactly when the last update was a reception.
template <typename Scalar>
struct DecoderState {
  VectorX<Scalar> estimate;
  VectorX<Scalar> last_input;
  int age = 0;
};

/// AoI recursion: reset on reception, otherwise grow by one.
constexpr int update_aoi(int age, bool received) { return received ? 0 : age + 1; }

/// One decoder step. On reception the estimate is the plant state, otherwise the
/// model prediction from the previous estimate and input.
template <typename Scalar, typename DX, typename DU, typename DA, typename DB>
DecoderState<Scalar> decoder_update(const DecoderState<Scalar>& state, const Eigen::MatrixBase<DX>& plant_state,
                                    const Eigen::MatrixBase<DU>& previous_input, bool received,
                                    const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DB>& B) {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n || plant_state.size() != n || state.estimate.size() != n ||
      previous_input.size() != B.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "decoder_update operands have inconsistent sizes");
  }
  DecoderState<Scalar> next;
  if (received) {
    next.estimate = plant_state;
  } else {
    next.estimate = A * state.estimate + B * previous_input;
  }
  next.last_input = previous_input;
  next.age = update_aoi(state.age, received);
  return next;
}

/// Expected squared estimation error after `age` steps without reception:
/// sum_{l=1}^{age} tr((A^{l-1})^T A^{l-1} C_W).
template <typename DA, typename DC>
typename DA::Scalar error_weight(int age, const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DC>& C_W) {
  using Scalar = typename DA::Scalar;
  Scalar total(0);
  MatrixX<Scalar> power = MatrixX<Scalar>::Identity(A.rows(), A.cols());
  for (int l = 1; l <= age; ++l) {
    total += (power.transpose() * power * C_W).trace();
    power = A * power;
  }
  return total;
}

/// Scheduling cost of an agent at the given age: error_weight(age) * age.
template <typename DA, typename DC>
typename DA::Scalar running_cost(int age, const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DC>& C_W) {
  return error_weight(age, A, C_W) * static_cast<typename DA::Scalar>(age);
}

/// Memoized error weights for one type. Grows on demand; not shared between threads.
template <typename Scalar>
class ErrorWeightTable {
 public:
  ErrorWeightTable(MatrixX<Scalar> A, MatrixX<Scalar> C_W)
      : A_(std::move(A)), C_W_(std::move(C_W)), power_(MatrixX<Scalar>::Identity(A_.rows(), A_.cols())) {
    weights_.push_back(Scalar(0));
  }

  Scalar weight(int age) {
    extend(age);
    return weights_[static_cast<std::size_t>(age)];
  }

  Scalar cost(int age) { return weight(age) * static_cast<Scalar>(age); }

  const MatrixX<Scalar>& A() const { return A_; }
  const MatrixX<Scalar>& C_W() const { return C_W_; }

 private:
  void extend(int age) {
    while (static_cast<int>(weights_.size()) <= age) {
      // weights_[l] = weights_[l-1] + tr(P^T P C_W) with P = A^{l-1}
      weights_.push_back(weights_.back() + (power_.transpose() * power_ * C_W_).trace());
      power_ = A_ * power_;
    }
  }

  MatrixX<Scalar> A_;
  MatrixX<Scalar> C_W_;
  MatrixX<Scalar> power_;
  std::vector<Scalar> weights_;
};

}  // namespace aoi
