#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>

#include "hybridgrid/errors.hpp"

namespace hybridgrid {

/// Fixed-step transport delay. push() enters the current value and returns the
/// value from `delay` seconds earlier; while the buffer is still filling the
/// oldest available value is held (zero-order hold). A zero delay is the
/// identity.
class DelayBuffer {
public:
    DelayBuffer(double delay_s, double dt) {
        if (delay_s < 0.0) throw NegativeDelay();
        if (!(dt > 0.0)) throw DimensionMismatch("delay buffer needs dt > 0");
        depth_ = static_cast<std::size_t>(std::llround(delay_s / dt));
    }

    Eigen::VectorXd push(const Eigen::VectorXd& value) {
        buffer_.push_back(value);
        if (buffer_.size() > depth_ + 1) buffer_.pop_front();
        return buffer_.front();
    }

    std::size_t depth() const { return depth_; }

private:
    std::size_t depth_ = 0;
    std::deque<Eigen::VectorXd> buffer_;
};

/// Scalar convenience wrapper.
inline double delayed_signal(DelayBuffer& buffer, double value) {
    Eigen::VectorXd v(1);
    v(0) = value;
    return buffer.push(v)(0);
}

}  // namespace hybridgrid
