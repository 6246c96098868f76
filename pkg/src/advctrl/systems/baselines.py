"""Classical baseline controllers for the two case studies."""

from __future__ import annotations

from .platoon import VehicleParams, motor_speed

__all__ = ["AngleSlidingMode", "DistancePid"]


def _sat(x: float) -> float:
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


class AngleSlidingMode:
    """Sliding-mode pole balancer: force = -gain * sat(sigma / boundary)
    on the surface sigma = angle_rate + slope * angle.

    Stabilizes the pole angle only; the cart position is not regulated.
    With this plant's sign convention (positive force accelerates the
    cart toward positive x, which pushes the pole back from positive
    angles) the stabilizing gain is negative.
    """

    noise_dim = 0

    def __init__(self, gain: float = -30.0, slope: float = 2.0,
                 boundary: float = 2.0):
        if boundary <= 0.0:
            raise ValueError("boundary layer width must be positive")
        self.gain = gain
        self.slope = slope
        self.boundary = boundary

    def act(self, obs, noise=(), step: int = 0):
        # observation layout: (position, velocity, angle, angle_rate, ...)
        sigma = obs[3] + self.slope * obs[2]
        return (-self.gain * _sat(sigma / self.boundary),)


class DistancePid:
    """Gap-tracking PID for the platoon follower.

    Acts on the gap error with a clamped (anti-windup) integral; the
    derivative term uses the measured closing speed directly.  In
    acceleration mode it returns a bounded acceleration.  Given vehicle
    parameters it converts the desired acceleration to motor/brake
    torque instead, compensating rolling and air drag and preferring the
    motor (including regeneration) over the friction brake.
    """

    noise_dim = 0

    def __init__(self, kp: float = 0.25, ki: float = 0.0, kd: float = 1.2,
                 target: float = 4.0, dt: float = 0.05,
                 out_limit: float = 5.0, integral_limit: float = 10.0,
                 vehicle: VehicleParams | None = None):
        self.kp = kp
        self.ki = ki
        self.kd = kd
        self.target = target
        self.dt = dt
        self.out_limit = out_limit
        self.integral_limit = integral_limit
        self.vehicle = vehicle
        self.integral = 0.0

    def reset(self):
        self.integral = 0.0

    def _desired_accel(self, front_v: float, own_v: float, gap: float) -> float:
        err = gap - self.target
        self.integral += err * self.dt
        if self.integral > self.integral_limit:
            self.integral = self.integral_limit
        elif self.integral < -self.integral_limit:
            self.integral = -self.integral_limit
        a = self.kp * err + self.ki * self.integral + self.kd * (front_v - own_v)
        if a > self.out_limit:
            return self.out_limit
        if a < -self.out_limit:
            return -self.out_limit
        return a

    def act(self, obs, noise=(), step: int = 0):
        front_v, own_v, gap = obs[0], obs[1], obs[2]
        a = self._desired_accel(front_v, own_v, gap)
        vp = self.vehicle
        if vp is None:
            return (a,)
        # invert the longitudinal dynamics: wheel force for the desired
        # acceleration plus the current resistive losses
        force = vp.mass * a + vp.rolling_coeff * vp.mass * vp.gravity * own_v \
            + 0.5 * vp.air_density * vp.drag_coeff * vp.frontal_area * own_v * own_v
        t_wheel = force * vp.wheel_radius
        t_cap = vp.motor_torque_max if motor_speed(vp, own_v) <= vp.motor_speed_cap \
            else 0.0
        t_motor = t_wheel / vp.gear_ratio
        if t_motor > t_cap:
            t_motor = t_cap
        elif t_motor < -t_cap:
            t_motor = -t_cap
        t_brake = t_wheel - t_motor * vp.gear_ratio
        if t_brake > 0.0:
            t_brake = 0.0
        elif t_brake < -vp.brake_torque_max:
            t_brake = -vp.brake_torque_max
        return (t_motor, t_brake)
