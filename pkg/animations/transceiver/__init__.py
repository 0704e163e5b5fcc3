"""Transceiver - spreading, spectrum, recovery and error rate of the 868/915 MHz BPSK PHY"""
