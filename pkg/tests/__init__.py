# QCNN test suite
