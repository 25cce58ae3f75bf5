"""Event-based perception and spiking state estimation, desk scale.

Submodules:
    scene      synthetic rotating-disk frames + analytic ground truth
    dvs        event-camera emulation (log-intensity change model)
    detect     decaying event surface and cluster detection
    lif        leaky integrate-and-fire neuron engine
    classifier patch classifier for detection validation
    sif        dense extended sliding-innovation filter
    neural     spiking realization of the filter (population coding)
    tracking   multi-object track management
    pipeline   end-to-end runs, metrics, file emission
"""

__version__ = "0.1.0"
